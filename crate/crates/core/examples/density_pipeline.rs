//! Densities as regressors: transform a sequence of densities, compute their
//! standardized moments, build a lagged auxiliary series and test θ = 0.

use funflir::app::{build_lagged_auxiliary, standardized_moments, transform, DensitySample, TransformKind};
use funflir::hilbert::ScalarSeries;
use funflir::testkit::{run_test, TestConfig, TestInput, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> funflir::Result<()> {
    let t_len = 150;
    let support: Vec<f64> = (0..121).map(|i| -10.0 + 0.375 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut mu, mut rows, mut y) = (12.0, Vec::new(), Vec::new());
    for _ in 0..t_len {
        mu = 12.0 + 0.6 * (mu - 12.0) + rng.sample::<f64, _>(StandardNormal);
        let sd = 4.0 + 0.5 * rng.gen::<f64>();
        rows.push(support.iter().map(|x| (-(x - mu).powi(2) / (2.0 * sd * sd)).exp()).collect());
        y.push(rng.sample::<f64, _>(StandardNormal));
    }
    let d = DensitySample::new(support, &rows)?;
    println!("rescaled rows: {}", d.renormalized_rows().len());
    let m = standardized_moments(&d, 4)?;
    println!("period 1 moments (mean, sd, skewness, kurtosis): {:.3?}", m[0]);

    let ell = 2;
    let y = ScalarSeries::new(y[ell..].to_vec())?;
    for kind in [TransformKind::Clr, TransformKind::Lcdf, TransformKind::Qf] {
        let x = transform(&d, kind)?;
        let z = build_lagged_auxiliary(&x, ell, 0.5)?;
        let x = x.slice(ell, t_len);
        let cfg = TestConfig {
            variant: Variant::Intercept,
            ..TestConfig::default()
        };
        let r = run_test(&cfg, &TestInput::new(&y, &x).instrument(&z))?;
        println!("{kind:?}: statistic {:.5}, p-value {:.3}", r.statistic, r.p_value);
    }
    Ok(())
}
