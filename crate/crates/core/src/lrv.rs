//! Long-run covariance estimation for functional series.
//!
//! The estimator is the kernel-weighted sum of sample autocovariance
//! operators of a mean-centered series `v_t`,
//!
//! ```text
//! Λ̂ = (1/T) Σ_{|s| ≤ ⌊h⌋} k(s/h) Γ̂_s,   Γ̂_s = Σ_t (v_{t−s} − v̄) ⊗ (v_t − v̄).
//! ```
//!
//! The lag sum is evaluated as `(1/T) V K Vᵀ` with the banded Toeplitz matrix
//! `K_{tτ} = k((t−τ)/h)`, which costs one pass over the lags plus one matrix
//! product.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{sym_eig, sym_eigenvalues, Curve, FunctionalSeries, HilbertOperator};

/// Lag-window kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    Bartlett,
    Parzen,
    TukeyHanning,
}

impl KernelSpec {
    pub fn value(self, x: f64) -> f64 {
        kernel_value(self, x)
    }

    /// Support `c`: the kernel vanishes for `|x| > c`.
    pub fn support(self) -> f64 {
        1.0
    }

    /// Characteristic exponent `φ`.
    pub fn smoothness(self) -> f64 {
        match self {
            KernelSpec::Bartlett => 1.0,
            KernelSpec::Parzen | KernelSpec::TukeyHanning => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelSpec::Bartlett => "bartlett",
            KernelSpec::Parzen => "parzen",
            KernelSpec::TukeyHanning => "tukey_hanning",
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bartlett" => Ok(KernelSpec::Bartlett),
            "parzen" => Ok(KernelSpec::Parzen),
            "tukey_hanning" | "tukeyhanning" | "th" => Ok(KernelSpec::TukeyHanning),
            other => Err(Error::invalid(format!("unknown kernel '{other}'"))),
        }
    }
}

pub fn kernel_value(spec: KernelSpec, x: f64) -> f64 {
    let a = x.abs();
    match spec {
        KernelSpec::Bartlett => (1.0 - a).max(0.0),
        KernelSpec::Parzen => {
            if a <= 0.5 {
                1.0 - 6.0 * a * a + 6.0 * a * a * a
            } else if a <= 1.0 {
                2.0 * (1.0 - a).powi(3)
            } else {
                0.0
            }
        }
        KernelSpec::TukeyHanning => {
            if a <= 1.0 {
                0.5 * (1.0 + (std::f64::consts::PI * x).cos())
            } else {
                0.0
            }
        }
    }
}

/// Smallest sample the estimator accepts.
pub const MIN_SAMPLE: usize = 4;

/// Kernel long-run covariance operator of `v` with bandwidth `h`.
pub fn sample_lrv(v: &FunctionalSeries, h: f64, kernel: KernelSpec) -> Result<HilbertOperator> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {h}")));
    }
    let t_len = v.len();
    if t_len < MIN_SAMPLE {
        return Err(Error::invalid(format!(
            "long-run covariance needs at least {MIN_SAMPLE} periods, got {t_len}"
        )));
    }
    let centered = v.demeaned();
    let vm = centered.data();
    let n = vm.nrows();
    let max_lag = (h.floor() as usize).min(t_len - 1);

    // Y = V K, column t gathers k(s/h)-weighted neighbours of v_t
    let mut y = vm.clone();
    for s in 1..=max_lag {
        let k = kernel_value(kernel, s as f64 / h);
        if k == 0.0 {
            continue;
        }
        for t in 0..t_len {
            let mut acc = y.column_mut(t);
            if t + s < t_len {
                acc.axpy(k, &vm.column(t + s), 1.0);
            }
            if t >= s {
                acc.axpy(k, &vm.column(t - s), 1.0);
            }
        }
    }
    let mut kernel_matrix = DMatrix::zeros(n, n);
    kernel_matrix.gemm(1.0 / t_len as f64, &y, &vm.transpose(), 0.0);
    let op = HilbertOperator::from_parts(v.grid().clone(), kernel_matrix);
    Ok(op.symmetrized())
}

/// Projections of a demeaned series onto the leading eigenfunctions of its
/// sample covariance.
#[derive(Debug, Clone)]
pub struct FpcaScores {
    /// `T × n`.
    pub scores: DMatrix<f64>,
    /// Eigenvalues of the sample covariance for the returned components.
    pub variances: Vec<f64>,
    /// Set when fewer than `n` components carry variance; those columns are zero.
    pub rank_deficient: bool,
}

pub fn fpca_scores(series: &FunctionalSeries, n_components: usize) -> Result<FpcaScores> {
    let t_len = series.len();
    if n_components > t_len {
        return Err(Error::invalid(format!(
            "{n_components} components requested from {t_len} periods"
        )));
    }
    if n_components == 0 {
        return Ok(FpcaScores {
            scores: DMatrix::zeros(t_len, 0),
            variances: Vec::new(),
            rank_deficient: false,
        });
    }
    let centered = series.demeaned();
    let vm = centered.data();
    let mut cov = DMatrix::zeros(vm.nrows(), vm.nrows());
    cov.gemm(1.0 / t_len as f64, vm, &vm.transpose(), 0.0);
    let eig = sym_eig(&HilbertOperator::from_parts(series.grid().clone(), cov))?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let tol = 1e-12 * top.max(f64::MIN_POSITIVE);

    let weights = series.grid().weights();
    let mut scores = DMatrix::zeros(t_len, n_components);
    let mut variances = Vec::with_capacity(n_components);
    let mut rank_deficient = false;
    for j in 0..n_components {
        let lam = eig.values.get(j).copied().unwrap_or(0.0);
        if lam <= tol {
            rank_deficient = true;
            variances.push(0.0);
            continue;
        }
        variances.push(lam);
        let wv: Vec<f64> = eig.vectors[j].values().iter().zip(weights).map(|(e, w)| e * w).collect();
        for t in 0..t_len {
            scores[(t, j)] = vm.column(t).iter().zip(&wv).map(|(a, b)| a * b).sum();
        }
    }
    Ok(FpcaScores {
        scores,
        variances,
        rank_deficient,
    })
}

/// Per-score AR(1) fit used by [`andrews_bandwidth`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Fit {
    pub rho: f64,
    pub sigma2: f64,
}

/// Largest autoregressive coefficient magnitude fed into the bandwidth rule.
pub const MAX_AR_COEFFICIENT: f64 = 0.97;

/// Least-squares AR(1) without intercept. Degenerate series give `ρ = 0`.
pub fn ar1_fit(x: &[f64]) -> Ar1Fit {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for w in x.windows(2) {
        sxy += w[0] * w[1];
        sxx += w[0] * w[0];
    }
    let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().cloned().fold(f64::INFINITY, f64::min);
    if x.len() < 3 || !(sxx > 0.0) || spread <= 1e-14 * scale.max(1e-300) {
        return Ar1Fit { rho: 0.0, sigma2: 0.0 };
    }
    let rho = (sxy / sxx).clamp(-MAX_AR_COEFFICIENT, MAX_AR_COEFFICIENT);
    let resid: f64 = x.windows(2).map(|w| (w[1] - rho * w[0]).powi(2)).sum();
    Ar1Fit {
        rho,
        sigma2: resid / (x.len() - 1) as f64,
    }
}

/// Automatic bandwidth from AR(1) approximations of the columns of `scores`
/// (`T × n`), aggregated with unit weights. Never below 1.
pub fn andrews_bandwidth(scores: &DMatrix<f64>, kernel: KernelSpec) -> Result<f64> {
    let t_len = scores.nrows();
    if scores.ncols() == 0 {
        return Err(Error::invalid("bandwidth selection needs at least one score series"));
    }
    let fits: Vec<Ar1Fit> = (0..scores.ncols())
        .map(|j| ar1_fit(scores.column(j).as_slice()))
        .collect();
    let alpha = andrews_alpha(&fits, kernel.smoothness() as i32);
    let tf = t_len as f64;
    let h = match kernel {
        KernelSpec::Bartlett => 1.1447 * (alpha * tf).powf(1.0 / 3.0),
        KernelSpec::Parzen => 2.6614 * (alpha * tf).powf(0.2),
        KernelSpec::TukeyHanning => 1.7462 * (alpha * tf).powf(0.2),
    };
    if !h.is_finite() {
        return Err(Error::NonFinite("bandwidth"));
    }
    Ok(h.max(1.0))
}

/// `α̂(q)` for `q ∈ {1, 2}`; zero when no score carries variance.
pub fn andrews_alpha(fits: &[Ar1Fit], q: i32) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for f in fits {
        let (r, s4) = (f.rho, f.sigma2 * f.sigma2);
        num += if q == 1 {
            4.0 * r * r * s4 / ((1.0 - r).powi(6) * (1.0 + r).powi(2))
        } else {
            4.0 * r * r * s4 / (1.0 - r).powi(8)
        };
        den += s4 / (1.0 - r).powi(4);
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// `5 + ⌈T^0.333⌉`.
pub fn default_dt(t_len: usize) -> Result<usize> {
    if t_len < 2 {
        return Err(Error::invalid("truncation rule needs T ≥ 2"));
    }
    Ok(5 + (t_len as f64).powf(0.333).ceil() as usize)
}

/// Leading eigenpairs with negative eigenvalues set to zero.
#[derive(Debug, Clone)]
pub struct Truncated {
    pub values: Vec<f64>,
    /// Empty when only eigenvalues were requested.
    pub vectors: Vec<Curve>,
    /// `d_T` exceeded the number of available eigenvalues; the tail is zero.
    pub padded: bool,
}

pub fn truncated_eigs(a: &HilbertOperator, d_t: usize) -> Result<Truncated> {
    check_dt(d_t)?;
    let eig = sym_eig(a)?;
    let mut vectors: Vec<Curve> = eig.vectors.into_iter().take(d_t).collect();
    let (values, padded) = clip_and_pad(eig.values, d_t);
    while vectors.len() < d_t {
        vectors.push(Curve::zeros(a.grid()));
    }
    Ok(Truncated {
        values,
        vectors,
        padded,
    })
}

/// Eigenvalue-only variant of [`truncated_eigs`].
pub fn truncated_eigenvalues(a: &HilbertOperator, d_t: usize) -> Result<Truncated> {
    check_dt(d_t)?;
    let (values, padded) = clip_and_pad(sym_eigenvalues(a)?, d_t);
    Ok(Truncated {
        values,
        vectors: Vec::new(),
        padded,
    })
}

fn check_dt(d_t: usize) -> Result<()> {
    if d_t == 0 {
        return Err(Error::invalid("truncation d_T must be at least 1"));
    }
    Ok(())
}

fn clip_and_pad(mut values: Vec<f64>, d_t: usize) -> (Vec<f64>, bool) {
    values.truncate(d_t);
    for v in values.iter_mut() {
        *v = v.max(0.0);
    }
    let padded = values.len() < d_t;
    values.resize(d_t, 0.0);
    (values, padded)
}

/// Bandwidth rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Automatic rule on the first `n_scores` FPCA scores of the LRV input.
    AndrewsAuto { n_scores: usize },
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::AndrewsAuto { n_scores: 5 }
    }
}

/// Estimated operator with its truncated spectrum.
#[derive(Debug, Clone)]
pub struct LrvEstimate {
    pub operator: HilbertOperator,
    pub bandwidth: f64,
    pub eigenvalues: Vec<f64>,
    /// Empty unless requested.
    pub eigenvectors: Vec<Curve>,
    pub d_t: usize,
    pub padded: bool,
}

/// Bandwidth selection, estimation and truncation in one call.
pub fn estimate_lrv(
    v: &FunctionalSeries,
    kernel: KernelSpec,
    bandwidth: Bandwidth,
    d_t: usize,
    with_vectors: bool,
) -> Result<LrvEstimate> {
    let h = select_bandwidth(v, kernel, bandwidth)?;
    let operator = sample_lrv(v, h, kernel)?;
    let tr = if with_vectors {
        truncated_eigs(&operator, d_t)?
    } else {
        truncated_eigenvalues(&operator, d_t)?
    };
    Ok(LrvEstimate {
        operator,
        bandwidth: h,
        eigenvalues: tr.values,
        eigenvectors: tr.vectors,
        d_t,
        padded: tr.padded,
    })
}

pub fn select_bandwidth(v: &FunctionalSeries, kernel: KernelSpec, bandwidth: Bandwidth) -> Result<f64> {
    match bandwidth {
        Bandwidth::Fixed(h) => Ok(h),
        Bandwidth::AndrewsAuto { n_scores } => {
            let n = n_scores.min(v.len()).min(v.grid().len());
            let fpca = fpca_scores(v, n)?;
            if fpca.scores.ncols() == 0 {
                return Ok(1.0);
            }
            andrews_bandwidth(&fpca.scores, kernel)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{fourier_basis, Grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    const KERNELS: [KernelSpec; 3] = [KernelSpec::Bartlett, KernelSpec::Parzen, KernelSpec::TukeyHanning];

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        rng.sample(StandardNormal)
    }

    fn random_series(grid: &Arc<Grid>, t: usize, rng: &mut ChaCha8Rng) -> FunctionalSeries {
        let d = DMatrix::from_fn(grid.len(), t, |_, _| gaussian(rng));
        FunctionalSeries::new(grid.clone(), d).unwrap()
    }

    /// Direct double loop over lags and periods.
    fn brute_force_lrv(v: &FunctionalSeries, h: f64, k: KernelSpec) -> DMatrix<f64> {
        let t = v.len();
        let c = v.demeaned();
        let n = v.grid().len();
        let mut out = DMatrix::zeros(n, n);
        let m = h.floor() as i64;
        for s in -m..=m {
            let w = kernel_value(k, s as f64 / h);
            for tt in 0..t as i64 {
                let lag = tt - s;
                if lag < 0 || lag >= t as i64 {
                    continue;
                }
                // (v_{t-s} ⊗ v_t) has kernel v_t v_{t-s}ᵀ
                let a = c.values(tt as usize);
                let b = c.values(lag as usize);
                for i in 0..n {
                    for j in 0..n {
                        out[(i, j)] += w * a[i] * b[j];
                    }
                }
            }
        }
        out / t as f64
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_value(KernelSpec::Bartlett, 0.0), 1.0);
        assert_eq!(kernel_value(KernelSpec::Bartlett, 1.5), 0.0);
        assert_eq!(kernel_value(KernelSpec::Bartlett, 0.5), 0.5);
        assert!((kernel_value(KernelSpec::Parzen, 0.25) - 0.71875).abs() < 1e-15);
        assert!((kernel_value(KernelSpec::Parzen, 0.75) - 2.0 * 0.25f64.powi(3)).abs() < 1e-15);
        assert!((kernel_value(KernelSpec::TukeyHanning, 0.5) - 0.5).abs() < 1e-15);
        for k in KERNELS {
            assert_eq!(k.value(0.0), 1.0);
            assert_eq!(k.value(1.01), 0.0);
            assert_eq!(k.value(-3.0), 0.0);
            assert_eq!(k.name().parse::<KernelSpec>().unwrap(), k);
        }
        assert!("gauss".parse::<KernelSpec>().is_err());
    }

    proptest! {
        #[test]
        fn kernels_even_and_bounded(x in -3.0f64..3.0) {
            for k in KERNELS {
                prop_assert_eq!(k.value(x), k.value(-x));
                prop_assert!(k.value(x) <= 1.0 && k.value(x) >= 0.0);
            }
        }

        #[test]
        fn lrv_matches_brute_force(seed in 0u64..1000, t in 4usize..30, h in 0.3f64..6.0) {
            let g = Grid::uniform(4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_series(&g, t, &mut rng);
            for k in KERNELS {
                let fast = sample_lrv(&v, h, k).unwrap();
                let slow = brute_force_lrv(&v, h, k);
                let slow = (&slow + slow.transpose()) * 0.5;
                prop_assert!((fast.kernel() - &slow).abs().max() < 1e-12);
                prop_assert!(fast.asymmetry() == 0.0);
            }
        }
    }

    #[test]
    fn zero_series_gives_zero_operator() {
        let g = Grid::uniform(5);
        let v = FunctionalSeries::new(g, DMatrix::zeros(5, 10)).unwrap();
        assert!(sample_lrv(&v, 2.0, KernelSpec::Bartlett).unwrap().kernel().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scalar_hand_case() {
        let g = Grid::singleton();
        let v = FunctionalSeries::new(g, DMatrix::from_row_slice(1, 4, &[1.0, -1.0, 0.0, 0.0])).unwrap();
        // TΓ̂_0 = 2, TΓ̂_{±1} = −1; Bartlett at h=1 drops lag one, at h=2 weighs it by 1/2
        let a = sample_lrv(&v, 1.0, KernelSpec::Bartlett).unwrap();
        assert!((a.kernel()[(0, 0)] - 2.0 / 4.0).abs() < 1e-15);
        let b = sample_lrv(&v, 2.0, KernelSpec::Bartlett).unwrap();
        assert!((b.kernel()[(0, 0)] - (2.0 - 1.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        let g = Grid::uniform(3);
        let v = FunctionalSeries::new(g.clone(), DMatrix::zeros(3, 10)).unwrap();
        assert!(sample_lrv(&v, 0.0, KernelSpec::Bartlett).is_err());
        assert!(sample_lrv(&v, -1.0, KernelSpec::Bartlett).is_err());
        let short = FunctionalSeries::new(g, DMatrix::zeros(3, 2)).unwrap();
        assert!(sample_lrv(&short, 1.0, KernelSpec::Bartlett).is_err());
    }

    #[test]
    fn small_bandwidth_keeps_only_lag_zero() {
        let g = Grid::uniform(6);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_series(&g, 40, &mut rng);
        let c = v.demeaned();
        let gamma0 = c.data() * c.data().transpose() / 40.0;
        for k in KERNELS {
            let a = sample_lrv(&v, 0.7, k).unwrap();
            assert!((a.kernel() - &gamma0).abs().max() < 1e-13);
        }
    }

    #[test]
    fn iid_scalar_recovers_variance() {
        let g = Grid::singleton();
        let t = 5000;
        let sigma = 1.7;
        for k in KERNELS {
            let mut total = 0.0;
            for seed in 0..10 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = DMatrix::from_fn(1, t, |_, _| sigma * gaussian(&mut rng));
                let v = FunctionalSeries::new(g.clone(), d).unwrap();
                let h = (t as f64).powf(1.0 / 3.0);
                total += sym_eigenvalues(&sample_lrv(&v, h, k).unwrap()).unwrap()[0];
            }
            let mean = total / 10.0;
            assert!((mean / (sigma * sigma) - 1.0).abs() < 0.1, "{k:?} {mean}");
        }
    }

    #[test]
    fn bartlett_estimate_is_psd() {
        let g = Grid::uniform(8);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_series(&g, 60, &mut rng);
            let ev = sym_eigenvalues(&sample_lrv(&v, 4.5, KernelSpec::Bartlett).unwrap()).unwrap();
            assert!(ev.iter().all(|&l| l > -1e-8), "seed {seed}: {ev:?}");
        }
    }

    #[test]
    fn estimate_improves_with_sample_size() {
        // v_t = 2 ν₁ f₁ + ν₂ f₂ with independent standard normal ν
        let g = Grid::uniform(21);
        let (f1, f2) = (fourier_basis(1, &g), fourier_basis(2, &g));
        let truth = crate::hilbert::outer(&f1, &f1)
            .unwrap()
            .scale(4.0)
            .add(&crate::hilbert::outer(&f2, &f2).unwrap())
            .unwrap();
        let median_err = |t: usize| {
            let mut errs: Vec<f64> = (0..20)
                .map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed * 7 + t as u64);
                    let mut d = DMatrix::zeros(21, t);
                    for c in 0..t {
                        let (a, b) = (2.0 * gaussian(&mut rng), gaussian(&mut rng));
                        for i in 0..21 {
                            d[(i, c)] = a * f1.values()[i] + b * f2.values()[i];
                        }
                    }
                    let v = FunctionalSeries::new(g.clone(), d).unwrap();
                    let h = (t as f64).powf(1.0 / 3.0);
                    sample_lrv(&v, h, KernelSpec::Bartlett).unwrap().add(&truth.scale(-1.0)).unwrap().hs_norm()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[10]
        };
        assert!(median_err(3200) < median_err(200));
    }

    #[test]
    fn fpca_examples() {
        let g = Grid::uniform(31);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = fourier_basis(3, &g);
        let c: Vec<f64> = (0..50).map(|_| gaussian(&mut rng)).collect();
        let d = DMatrix::from_fn(31, 50, |i, t| c[t] * f.values()[i]);
        let s = FunctionalSeries::new(g.clone(), d).unwrap();
        let out = fpca_scores(&s, 2).unwrap();
        assert!(out.rank_deficient);
        assert!(out.scores.column(1).iter().all(|&x| x == 0.0));
        let mean = c.iter().sum::<f64>() / 50.0;
        let ratio = out.scores[(0, 0)] / (c[0] - mean);
        for t in 0..50 {
            assert!((out.scores[(t, 0)] - ratio * (c[t] - mean)).abs() < 1e-9);
        }
        assert!((ratio.abs() - 1.0).abs() < 1e-9);

        let empty = fpca_scores(&s, 0).unwrap();
        assert_eq!(empty.scores.ncols(), 0);
        assert!(fpca_scores(&s, 51).is_err());

        let t = 2000;
        let (f1, f2) = (fourier_basis(1, &g), fourier_basis(2, &g));
        let mut d = DMatrix::zeros(31, t);
        for col in 0..t {
            let (a, b) = (2.0 * gaussian(&mut rng), gaussian(&mut rng));
            for i in 0..31 {
                d[(i, col)] = a * f1.values()[i] + b * f2.values()[i];
            }
        }
        let s = FunctionalSeries::new(g, d).unwrap();
        let out = fpca_scores(&s, 2).unwrap();
        let var = |j: usize| out.scores.column(j).iter().map(|x| x * x).sum::<f64>() / t as f64;
        assert!((var(0) / 4.0 - 1.0).abs() < 0.1);
        assert!((var(1) - 1.0).abs() < 0.1);
    }

    #[test]
    fn bandwidth_floor_for_uncorrelated_scores() {
        let s: Vec<f64> = (0..400).map(|t| [1.0, 0.0, -1.0, 0.0][t % 4]).collect();
        let m = DMatrix::from_column_slice(400, 1, &s);
        for k in KERNELS {
            assert_eq!(andrews_bandwidth(&m, k).unwrap(), 1.0);
        }
        let zeros = DMatrix::zeros(400, 3);
        assert_eq!(andrews_bandwidth(&zeros, KernelSpec::Bartlett).unwrap(), 1.0);
        assert!(andrews_bandwidth(&DMatrix::zeros(10, 0), KernelSpec::Bartlett).is_err());
    }

    #[test]
    fn bartlett_bandwidth_matches_formula() {
        let t = 400;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = vec![0.0; t];
        for i in 1..t {
            x[i] = 0.5 * x[i - 1] + gaussian(&mut rng);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..t {
            num += x[i] * x[i - 1];
            den += x[i - 1] * x[i - 1];
        }
        let rho = num / den;
        let mut ss = 0.0;
        for i in 1..t {
            ss += (x[i] - rho * x[i - 1]).powi(2);
        }
        let s2 = ss / (t - 1) as f64;
        let a1 = (4.0 * rho * rho * s2 * s2 / ((1.0 - rho).powi(6) * (1.0 + rho).powi(2)))
            / (s2 * s2 / (1.0 - rho).powi(4));
        let expected = 1.1447 * (a1 * t as f64).cbrt();
        let got = andrews_bandwidth(&DMatrix::from_column_slice(t, 1, &x), KernelSpec::Bartlett).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected);
        assert!(got > 1.0);
    }

    #[test]
    fn bandwidth_monotone_in_rho() {
        for k in KERNELS {
            let hs: Vec<f64> = [0.0, 0.2, 0.4, 0.6, 0.8]
                .iter()
                .map(|&rho| {
                    let fit = [Ar1Fit { rho, sigma2: 1.0 }];
                    let alpha = andrews_alpha(&fit, k.smoothness() as i32);
                    let c = match k {
                        KernelSpec::Bartlett => 1.1447 * (alpha * 400.0).cbrt(),
                        KernelSpec::Parzen => 2.6614 * (alpha * 400.0).powf(0.2),
                        KernelSpec::TukeyHanning => 1.7462 * (alpha * 400.0).powf(0.2),
                    };
                    c.max(1.0)
                })
                .collect();
            assert!(hs.windows(2).all(|w| w[1] >= w[0]), "{k:?} {hs:?}");
        }
    }

    #[test]
    fn constant_scores_use_zero_rho() {
        let fit = ar1_fit(&[2.0; 50]);
        assert_eq!(fit.rho, 0.0);
    }

    #[test]
    fn truncation_examples() {
        let g = Grid::uniform(11);
        let (f1, f2) = (fourier_basis(1, &g), fourier_basis(2, &g));
        let psd = crate::hilbert::outer(&f1, &f1).unwrap().scale(3.0);
        let tr = truncated_eigs(&psd, 2).unwrap();
        assert!((tr.values[0] - 3.0).abs() < 1e-10 && tr.values[1].abs() < 1e-10);
        let indefinite = psd.add(&crate::hilbert::outer(&f2, &f2).unwrap().scale(-0.1)).unwrap();
        // two-point grid, weights 1/2: kernel diag(6, −0.2) has spectrum (3, −0.1)
        let two = Grid::new(vec![0.0, 1.0]).unwrap();
        let op = HilbertOperator::new(two, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![6.0, -0.2]))).unwrap();
        let tr = truncated_eigs(&op, 2).unwrap();
        assert!((tr.values[0] - 3.0).abs() < 1e-12);
        assert_eq!(tr.values[1], 0.0);
        assert!(!tr.padded);
        assert!(truncated_eigs(&op, 3).unwrap().padded);
        let tr = truncated_eigenvalues(&indefinite, 20).unwrap();
        assert!(tr.padded);
        assert_eq!(tr.values.len(), 20);
        assert!(tr.values.windows(2).all(|w| w[0] >= w[1]) && tr.values.iter().all(|&v| v >= 0.0));
        assert_eq!(truncated_eigs(&indefinite, 20).unwrap().vectors.len(), 20);
        assert!(truncated_eigs(&psd, 0).is_err());
    }

    #[test]
    fn truncation_rule() {
        assert_eq!(default_dt(100).unwrap(), 10);
        assert_eq!(default_dt(400).unwrap(), 13);
        assert_eq!(default_dt(200).unwrap(), 11);
        assert!(default_dt(1).is_err());
    }

    #[test]
    fn estimate_pipeline_consistent() {
        let g = Grid::uniform(9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_series(&g, 120, &mut rng);
        let est = estimate_lrv(&v, KernelSpec::Parzen, Bandwidth::default(), 6, true).unwrap();
        assert!(est.bandwidth >= 1.0);
        let direct = sample_lrv(&v, est.bandwidth, KernelSpec::Parzen).unwrap();
        let ev = truncated_eigenvalues(&direct, 6).unwrap().values;
        for (a, b) in ev.iter().zip(&est.eigenvalues) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(est.eigenvectors.len(), 6);
    }
}
