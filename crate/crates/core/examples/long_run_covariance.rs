//! Kernel long-run covariance of a dependent functional series: automatic
//! bandwidths per kernel and the truncated spectrum used for calibration.

use funflir::hilbert::{fourier_basis, Curve, FunctionalSeries, Grid};
use funflir::lrv::{default_dt, estimate_lrv, fpca_scores, Bandwidth, KernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> funflir::Result<()> {
    let grid = Grid::uniform(51);
    let t_len = 400;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // functional AR(1) in three Fourier directions
    let basis: Vec<Curve> = (1..=3).map(|j| fourier_basis(j, &grid)).collect();
    let rho = [0.7, 0.4, -0.3];
    let mut c = [0.0; 3];
    let mut curves = Vec::with_capacity(t_len);
    for _ in 0..t_len {
        let mut v = Curve::zeros(&grid);
        for j in 0..3 {
            c[j] = rho[j] * c[j] + rng.sample::<f64, _>(StandardNormal);
            v = v.axpy(c[j], &basis[j])?;
        }
        curves.push(v);
    }
    let series = FunctionalSeries::from_curves(&curves)?;

    let fpca = fpca_scores(&series.demeaned(), 3)?;
    println!("FPCA variances: {:.3?}", fpca.variances);

    let d_t = default_dt(t_len)?;
    for kernel in [KernelSpec::Bartlett, KernelSpec::Parzen, KernelSpec::TukeyHanning] {
        let est = estimate_lrv(&series, kernel, Bandwidth::default(), d_t, false)?;
        println!(
            "{:>13}: bandwidth {:>5.2}, top eigenvalues {:.3?}",
            kernel.name(),
            est.bandwidth,
            &est.eigenvalues[..4]
        );
    }
    // the population long-run variances along f_j are 1/(1−ρ_j)²
    let truth: Vec<f64> = rho.iter().map(|r| 1.0 / (1.0 - r) / (1.0 - r)).collect();
    println!("population values along f1..f3: {truth:.3?}");
    Ok(())
}
