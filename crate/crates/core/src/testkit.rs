//! End-to-end test of `H₀: θ = θ₀` in `y_t = ⟨X_t, θ⟩ + u_t` using an
//! auxiliary functional series `Z_t`.
//!
//! Every variant reduces to a pair `(Z̃_t, ũ_t)` of preprocessed instruments
//! and null residuals. The moment process is built from `Z̃_t ũ_t`, the same
//! product series feeds the long-run covariance estimator, and the weighted
//! statistic is compared with a Monte Carlo critical value from its truncated
//! spectrum.

use serde::{Deserialize, Serialize};

use crate::critical::{sorted_pvalue, sorted_quantile, weighted_chisq_draws, DEGENERATE_TOLERANCE};
use crate::error::{Error, Result};
use crate::hilbert::{check_grid, Curve, FunctionalSeries, ScalarSeries};
use crate::lrv::{default_dt, estimate_lrv, Bandwidth, KernelSpec, LrvEstimate};
use crate::moment::{centered_inputs, multi_null_residuals, null_residuals, residualized_inputs, MomentProcess};
use crate::weights::{statistic, WeightSpec};

/// How the moment process is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Model without intercept.
    Plain,
    /// Model with intercept: `y`, `X` and `Z` are sample-demeaned.
    Intercept,
    /// Scalar covariates partialled out of `y`, `X` and `Z`.
    ScalarCovariates,
    /// Several functional regressors `X_1, …, X_K`.
    MultiFunctional,
    /// `Z := X`; valid only when `X` is exogenous.
    ExogeneityBenchmark,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "plain" => Ok(Variant::Plain),
            "intercept" => Ok(Variant::Intercept),
            "scalar_covariates" | "covariates" => Ok(Variant::ScalarCovariates),
            "multi_functional" | "multi" => Ok(Variant::MultiFunctional),
            "exogeneity_benchmark" | "benchmark" | "exogenous" => Ok(Variant::ExogeneityBenchmark),
            other => Err(Error::invalid(format!("unknown variant '{other}'"))),
        }
    }
}

/// Number of eigenvalues used for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// `5 + ⌈T^0.333⌉`.
    Auto,
    Fixed(usize),
}

impl Truncation {
    pub fn resolve(self, t_len: usize) -> Result<usize> {
        match self {
            Truncation::Auto => default_dt(t_len),
            Truncation::Fixed(0) => Err(Error::invalid("d_T must be at least 1")),
            Truncation::Fixed(d) => Ok(d),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestConfig {
    pub variant: Variant,
    pub weight: WeightSpec,
    pub kernel: KernelSpec,
    pub alpha: f64,
    pub d_t: Truncation,
    pub bandwidth: Bandwidth,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            variant: Variant::Plain,
            weight: WeightSpec::endpoint(),
            kernel: KernelSpec::Bartlett,
            alpha: 0.05,
            d_t: Truncation::Auto,
            bandwidth: Bandwidth::default(),
            mc_draws: 1000,
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.mc_draws < 100 {
            return Err(Error::invalid(format!("mc_draws must be at least 100, got {}", self.mc_draws)));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0) {
                return Err(Error::invalid("fixed bandwidth must be positive"));
            }
        }
        Ok(())
    }
}

/// Data for one test. Single-regressor variants use `xs[0]`; missing null
/// slopes default to zero.
#[derive(Debug, Clone)]
pub struct TestInput<'a> {
    pub y: &'a ScalarSeries,
    pub xs: Vec<&'a FunctionalSeries>,
    pub z: Option<&'a FunctionalSeries>,
    pub theta0: Vec<Curve>,
    pub covariates: Vec<ScalarSeries>,
}

impl<'a> TestInput<'a> {
    pub fn new(y: &'a ScalarSeries, x: &'a FunctionalSeries) -> Self {
        TestInput {
            y,
            xs: vec![x],
            z: None,
            theta0: Vec::new(),
            covariates: Vec::new(),
        }
    }

    pub fn multi(y: &'a ScalarSeries, xs: Vec<&'a FunctionalSeries>) -> Self {
        TestInput {
            y,
            xs,
            z: None,
            theta0: Vec::new(),
            covariates: Vec::new(),
        }
    }

    pub fn instrument(mut self, z: &'a FunctionalSeries) -> Self {
        self.z = Some(z);
        self
    }

    pub fn theta0(mut self, theta0: Curve) -> Self {
        self.theta0 = vec![theta0];
        self
    }

    pub fn theta0s(mut self, theta0: Vec<Curve>) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn covariates(mut self, covariates: Vec<ScalarSeries>) -> Self {
        self.covariates = covariates;
        self
    }
}

/// Outcome of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub eigenvalues: Vec<f64>,
    pub bandwidth: f64,
    pub d_t: usize,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub variant: Variant,
    pub kernel: KernelSpec,
    pub weight: String,
    pub drift_factor: f64,
    pub alpha: f64,
    pub mc_draws: usize,
    pub seed: u64,
    pub sample_size: usize,
    /// `d_T` exceeded the number of available eigenvalues.
    pub padded_spectrum: bool,
    /// The estimated long-run covariance vanished together with the statistic.
    pub degenerate: bool,
}

/// Reject only when the statistic strictly exceeds the critical value.
pub fn decide(statistic: f64, critical_value: f64) -> bool {
    statistic > critical_value
}

/// Everything in a test that does not depend on the weight function.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    config: TestConfig,
    process: MomentProcess,
    lrv: LrvEstimate,
    /// Sorted null draws; empty for a degenerate spectrum.
    draws: Vec<f64>,
}

impl PreparedTest {
    pub fn new(config: &TestConfig, input: &TestInput<'_>) -> Result<PreparedTest> {
        config.validate()?;
        let products = product_series(config.variant, input)?;
        let t_len = products.len();
        let d_t = config.d_t.resolve(t_len)?;
        let lrv = estimate_lrv(&products, config.kernel, config.bandwidth, d_t, false)?;
        let process = MomentProcess::from_products(&products);
        let draws = if lrv.eigenvalues.iter().all(|&l| l <= DEGENERATE_TOLERANCE) {
            Vec::new()
        } else {
            let mut d = weighted_chisq_draws(&lrv.eigenvalues, config.mc_draws, config.seed)?;
            d.sort_unstable_by(f64::total_cmp);
            d
        };
        Ok(PreparedTest {
            config: config.clone(),
            process,
            lrv,
            draws,
        })
    }

    pub fn process(&self) -> &MomentProcess {
        &self.process
    }

    pub fn lrv(&self) -> &LrvEstimate {
        &self.lrv
    }

    pub fn config(&self) -> &TestConfig {
        &self.config
    }

    /// Test result for `weight` in place of the configured one.
    pub fn evaluate(&self, weight: &WeightSpec) -> Result<TestResult> {
        let stat = statistic(weight, &self.process)?;
        let degenerate = self.draws.is_empty();
        let (critical_value, p_value) = if degenerate {
            // a zero statistic with zero variance is no evidence against H₀
            if stat > 0.0 {
                return Err(Error::DegenerateSpectrum);
            }
            (0.0, 1.0)
        } else {
            let q = sorted_quantile(&self.draws, self.config.alpha)?;
            (q, sorted_pvalue(&self.draws, stat))
        };
        Ok(TestResult {
            statistic: stat,
            critical_value,
            p_value,
            reject: decide(stat, critical_value),
            eigenvalues: self.lrv.eigenvalues.clone(),
            bandwidth: self.lrv.bandwidth,
            d_t: self.lrv.d_t,
            diagnostics: Diagnostics {
                variant: self.config.variant,
                kernel: self.config.kernel,
                weight: weight.label(),
                drift_factor: weight.drift_factor(),
                alpha: self.config.alpha,
                mc_draws: self.config.mc_draws,
                seed: self.config.seed,
                sample_size: self.process.sample_size(),
                padded_spectrum: self.lrv.padded,
                degenerate,
            },
        })
    }

    pub fn result(&self) -> Result<TestResult> {
        self.evaluate(&self.config.weight)
    }
}

/// The product series `Z̃_t ũ_t` for a variant.
pub fn product_series(variant: Variant, input: &TestInput<'_>) -> Result<FunctionalSeries> {
    let x = *input
        .xs
        .first()
        .ok_or_else(|| Error::invalid("at least one functional regressor is required"))?;
    let t_len = input.y.len();
    for xi in &input.xs {
        if xi.len() != t_len {
            return Err(Error::LengthMismatch {
                what: "X",
                got: xi.len(),
                expected: t_len,
            });
        }
    }
    let z = match variant {
        Variant::ExogeneityBenchmark => x,
        _ => input
            .z
            .ok_or_else(|| Error::invalid("this variant requires the auxiliary series Z"))?,
    };
    if z.len() != t_len {
        return Err(Error::LengthMismatch {
            what: "Z",
            got: z.len(),
            expected: t_len,
        });
    }
    for xi in &input.xs {
        check_grid(z.grid(), xi.grid())?;
    }
    let theta0 = |k: usize| -> Result<Curve> {
        match input.theta0.get(k) {
            Some(c) => {
                check_grid(c.grid(), z.grid())?;
                Ok(c.clone())
            }
            None if input.theta0.is_empty() => Ok(Curve::zeros(z.grid())),
            None => Err(Error::LengthMismatch {
                what: "null slopes",
                got: input.theta0.len(),
                expected: input.xs.len(),
            }),
        }
    };
    if variant != Variant::MultiFunctional && input.xs.len() != 1 {
        return Err(Error::invalid("this variant takes exactly one functional regressor"));
    }
    let (zt, ut) = match variant {
        Variant::Plain | Variant::ExogeneityBenchmark => (z.clone(), null_residuals(input.y, x, &theta0(0)?)?),
        Variant::Intercept => centered_inputs(z, input.y, x, &theta0(0)?)?,
        Variant::ScalarCovariates => {
            if input.covariates.is_empty() {
                return Err(Error::invalid("the scalar-covariate variant needs at least one covariate"));
            }
            residualized_inputs(z, input.y, x, &theta0(0)?, &input.covariates)?
        }
        Variant::MultiFunctional => {
            let thetas = (0..input.xs.len()).map(theta0).collect::<Result<Vec<_>>>()?;
            let xs: Vec<FunctionalSeries> = input.xs.iter().map(|x| (*x).clone()).collect();
            (z.clone(), multi_null_residuals(input.y, &xs, &thetas)?)
        }
    };
    zt.scale_by(&ut)
}

pub fn run_test(config: &TestConfig, input: &TestInput<'_>) -> Result<TestResult> {
    PreparedTest::new(config, input)?.result()
}

/// Test of zero cross-covariance between `y` and `X` via `Z`: the
/// intercept-variant test of `θ = 0`.
pub fn correlation_test(
    config: &TestConfig,
    y: &ScalarSeries,
    x: &FunctionalSeries,
    z: &FunctionalSeries,
) -> Result<TestResult> {
    let cfg = TestConfig {
        variant: Variant::Intercept,
        ..config.clone()
    };
    run_test(&cfg, &TestInput::new(y, x).instrument(z))
}
