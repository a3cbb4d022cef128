//! Data-generating processes and Monte Carlo drivers.
//!
//! Three families are provided:
//!
//! * `BaselineNoIntercept`: a functional AR(1) regressor in the Fourier
//!   basis, contaminated by the regression error through `β_u u_t`, with an
//!   auxiliary series built from the lagged autoregressive part.
//! * `BaselineIntercept`: the same with random nonzero means added to `y`,
//!   `X` and `Z`.
//! * `SeongComparison`: Beta-density shaped auxiliary curves with a strong
//!   linear link to the regressor.
//!
//! Replications draw their own model parameters. Within a replication every
//! `κ`, `β_u`, kernel and weight shares the same random stream, so rejection
//! rates across those dimensions are directly comparable.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::critical::{derive_seed, stream};
use crate::error::{Error, Result};
use crate::hilbert::{fourier_basis, norm, Curve, FunctionalSeries, Grid, HilbertOperator, ScalarSeries};
use crate::lrv::{Bandwidth, KernelSpec};
use crate::testkit::{PreparedTest, TestConfig, TestInput, Truncation, Variant};
use crate::weights::WeightSpec;

/// Fourier coefficients carried by the autoregression.
pub const J_MAX: usize = 50;
pub const BURN_IN: usize = 200;
pub const AR_DECAY: f64 = 0.95;
/// Scale of the idiosyncratic bridge in the auxiliary series.
pub const AUX_NOISE_SCALE: f64 = 0.25;
pub const DEFAULT_GRID_SIZE: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BaselineNoIntercept,
    BaselineIntercept,
    SeongComparison,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Informative,
    WeaklyInformative,
}

impl Design {
    pub fn label(self) -> &'static str {
        match self {
            Design::Informative => "informative",
            Design::WeaklyInformative => "weakly informative",
        }
    }
}

/// One data-generating configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: Family,
    pub beta_u: f64,
    pub design: Design,
    pub t_len: usize,
    /// Baseline families: `y` loads `κ/√T` on `⟨X, ψ̄⟩`. Comparison family: the
    /// slope is `θ₀ + κψ̄`.
    pub kappa: f64,
    pub seed: u64,
    pub grid_size: usize,
    /// Loading of `X` on `Z` in the comparison family.
    pub vartheta: f64,
}

impl DgpSpec {
    pub fn new(family: Family, design: Design, t_len: usize) -> DgpSpec {
        DgpSpec {
            family,
            beta_u: 0.1,
            design,
            t_len,
            kappa: 0.0,
            seed: 0,
            grid_size: DEFAULT_GRID_SIZE,
            vartheta: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len < 10 {
            return Err(Error::invalid("simulated samples need T ≥ 10"));
        }
        if !self.beta_u.is_finite() {
            return Err(Error::NonFinite("beta_u"));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::invalid("kappa must be nonnegative"));
        }
        if self.grid_size < 3 {
            return Err(Error::invalid("grid needs at least three points"));
        }
        Ok(())
    }

    fn grid(&self) -> Arc<Grid> {
        Grid::uniform(self.grid_size)
    }
}

/// One simulated data set.
#[derive(Debug, Clone)]
pub struct Sample {
    pub z: FunctionalSeries,
    pub y: ScalarSeries,
    pub x: FunctionalSeries,
    /// Slope under the null hypothesis being tested.
    pub theta0: Curve,
}

/// Everything in a replication except the `κ` loading, so that several
/// alternatives can be evaluated on the same draw.
#[derive(Debug, Clone)]
pub struct SimDraw {
    pub z: FunctionalSeries,
    pub x: FunctionalSeries,
    /// `y` at `κ = 0`.
    pub base: Vec<f64>,
    /// `⟨X_t, ψ̄⟩`.
    pub signal: Vec<f64>,
    /// Multiplier turning `κ` into the loading on `signal`.
    pub kappa_scale: f64,
    pub theta0: Curve,
    pub psi: Curve,
}

impl SimDraw {
    pub fn y(&self, kappa: f64) -> ScalarSeries {
        let c = kappa * self.kappa_scale;
        ScalarSeries::from_parts(self.base.iter().zip(&self.signal).map(|(b, s)| b + c * s).collect())
    }

    pub fn sample(&self, kappa: f64) -> Sample {
        Sample {
            z: self.z.clone(),
            y: self.y(kappa),
            x: self.x.clone(),
            theta0: self.theta0.clone(),
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Standard Brownian bridge at the grid points: a Gaussian random walk with
/// exact increments, pinned at 1 by subtracting `s·W(1)`.
pub fn brownian_bridge(grid: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    bridge_into(grid, rng, &mut out);
    out
}

fn bridge_into(grid: &Grid, rng: &mut ChaCha8Rng, out: &mut [f64]) {
    let pts = grid.points();
    out[0] = 0.0;
    for i in 1..pts.len() {
        out[i] = out[i - 1] + (pts[i] - pts[i - 1]).sqrt() * gaussian(rng);
    }
    let end = out[pts.len() - 1];
    for (o, s) in out.iter_mut().zip(pts) {
        *o -= s * end;
    }
    out[pts.len() - 1] = 0.0;
}

/// `ψ/‖ψ‖` for `ψ = Σ_{j≤m} s_j ξ_j f_j` with i.i.d. standard normal `ξ_j`.
fn random_direction(grid: &Arc<Grid>, scales: &[f64], rng: &mut ChaCha8Rng) -> Curve {
    let mut v = Curve::zeros(grid);
    for (j, s) in scales.iter().enumerate() {
        let c = s * gaussian(rng);
        v = v.axpy(c, &fourier_basis(j + 1, grid)).expect("same grid");
    }
    let n = norm(&v);
    if n > 0.0 {
        v.scale(1.0 / n)
    } else {
        fourier_basis(1, grid)
    }
}

/// Randomized parameters of the baseline design.
#[derive(Debug, Clone)]
pub struct BaselineParams {
    /// `a_j (0.95)^{j−1}`, `j = 1..J_MAX`.
    pub ar: Vec<f64>,
    /// `b_j 1_J(j)`.
    pub loadings: Vec<f64>,
    pub relevant: Vec<usize>,
    pub psi: Curve,
}

impl BaselineParams {
    pub fn draw(design: Design, grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> BaselineParams {
        let ar: Vec<f64> = (0..J_MAX)
            .map(|j| rng.gen_range(-0.2..0.8) * AR_DECAY.powi(j as i32))
            .collect();
        let mut loadings: Vec<f64> = (0..J_MAX).map(|_| rng.gen_range(0.8..1.2)).collect();
        let psi = random_direction(grid, &[1.0; 3], rng);
        let relevant = match design {
            Design::Informative => (1..=J_MAX).collect(),
            Design::WeaklyInformative => {
                let n = rng.gen_range(1..=4);
                let mut set: Vec<usize> = sample_indices(rng, 5, n).into_iter().map(|i| i + 1).collect();
                set.sort_unstable();
                for (j, b) in loadings.iter_mut().enumerate() {
                    if !set.contains(&(j + 1)) {
                        *b = 0.0;
                    }
                }
                set
            }
        };
        BaselineParams {
            ar,
            loadings,
            relevant,
            psi,
        }
    }
}

struct BasisCache {
    /// `n × J_MAX`, column j holds `f_{j+1}` on the grid.
    values: DMatrix<f64>,
    /// `J_MAX × n`, maps grid values to quadrature coefficients.
    project: DMatrix<f64>,
}

impl BasisCache {
    fn new(grid: &Arc<Grid>) -> BasisCache {
        let n = grid.len();
        let mut values = DMatrix::zeros(n, J_MAX);
        for j in 0..J_MAX {
            let f = fourier_basis(j + 1, grid);
            values.column_mut(j).copy_from_slice(f.values());
        }
        let w = grid.weights();
        let project = DMatrix::from_fn(J_MAX, n, |j, i| values[(i, j)] * w[i]);
        BasisCache { values, project }
    }
}

/// One replication of the baseline design with the given parameters.
pub fn simulate_baseline(
    params: &BaselineParams,
    grid: &Arc<Grid>,
    t_len: usize,
    beta_u: f64,
    rng: &mut ChaCha8Rng,
) -> SimDraw {
    let n = grid.len();
    let basis = BasisCache::new(grid);
    let mut coef = DVector::zeros(J_MAX);
    let mut xd = DMatrix::zeros(n, t_len);
    let mut zd = DMatrix::zeros(n, t_len);
    let mut u = Vec::with_capacity(t_len);
    let mut e = vec![0.0; n];
    let mut v = vec![0.0; n];
    let loadings = DVector::from_column_slice(&params.loadings);
    let ar = DVector::from_column_slice(&params.ar);
    for step in 0..BURN_IN + t_len {
        let ut = gaussian(rng);
        bridge_into(grid, rng, &mut e);
        let ev = DVector::from_column_slice(&e);
        let e_coef = &basis.project * &ev;
        let lagged = ar.component_mul(&coef);
        if step >= BURN_IN {
            bridge_into(grid, rng, &mut v);
            let t = step - BURN_IN;
            let x_lag = &basis.values * &lagged;
            let z_coef = loadings.component_mul(&(&lagged + &e_coef));
            let z_smooth = &basis.values * z_coef;
            for i in 0..n {
                xd[(i, t)] = x_lag[i] + beta_u * ut + e[i];
                zd[(i, t)] = z_smooth[i] + AUX_NOISE_SCALE * v[i];
            }
            u.push(ut);
        }
        coef = lagged + e_coef;
        coef[0] += beta_u * ut;
    }
    let x = FunctionalSeries::from_parts(grid.clone(), xd);
    let z = FunctionalSeries::from_parts(grid.clone(), zd);
    let signal = x.inner_with(&params.psi).expect("same grid");
    SimDraw {
        z,
        x,
        base: u,
        signal,
        kappa_scale: 1.0 / (t_len as f64).sqrt(),
        theta0: Curve::zeros(grid),
        psi: params.psi.clone(),
    }
}

/// Random means of the intercept design: `μ_y`, `μ_X`, `μ_Z`.
#[derive(Debug, Clone)]
pub struct Means {
    pub y: f64,
    pub x: Curve,
    pub z: Curve,
}

impl Means {
    pub fn draw(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Means {
        let y = gaussian(rng);
        let x = random_direction(grid, &[1.0; 3], rng);
        let z = random_direction(grid, &[1.0; 3], rng);
        Means { y, x, z }
    }

    fn apply(&self, d: &mut SimDraw) {
        d.x = d.x.shifted(&self.x).expect("same grid");
        d.z = d.z.shifted(&self.z).expect("same grid");
        // the loading stays on the centered regressor, so only the base moves
        for b in d.base.iter_mut() {
            *b += self.y;
        }
    }
}

/// Parameters of the comparison design.
#[derive(Debug, Clone)]
pub struct SeongParams {
    pub phi: Curve,
    pub theta0: Curve,
    pub psi: Curve,
}

/// `(A f)(s) = ∫ (1 − (s−r)²) f(r) dr` by grid quadrature.
pub fn quadratic_kernel_operator(grid: &Arc<Grid>) -> HilbertOperator {
    let p = grid.points();
    let k = DMatrix::from_fn(p.len(), p.len(), |i, j| 1.0 - (p[i] - p[j]).powi(2));
    HilbertOperator::new(grid.clone(), k).expect("finite kernel")
}

impl SeongParams {
    pub fn draw(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> SeongParams {
        let scales: Vec<f64> = (0..11).map(|j| 0.5f64.powi(j)).collect();
        let mut phi = Curve::zeros(grid);
        for (j, s) in scales.iter().enumerate() {
            phi = phi.axpy(s * gaussian(rng), &fourier_basis(j + 1, grid)).expect("same grid");
        }
        // the kernel is symmetric, so the adjoint is the operator itself
        let theta0 = crate::hilbert::apply(&quadratic_kernel_operator(grid), &phi).expect("same grid");
        let psi = random_direction(grid, &scales, rng);
        SeongParams { phi, theta0, psi }
    }
}

/// `Γ(a+b)/(Γ(a)Γ(b)) s^{a−1}(1−s)^{b−1}` on the grid.
pub fn beta_density(grid: &Grid, a: f64, b: f64) -> Vec<f64> {
    let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    grid.points()
        .iter()
        .map(|&s| {
            if s <= 0.0 || s >= 1.0 {
                // a, b > 1 here, so the density vanishes at the boundary
                0.0
            } else {
                (log_norm + (a - 1.0) * s.ln() + (b - 1.0) * (1.0 - s).ln()).exp()
            }
        })
        .collect()
}

pub fn simulate_seong(
    params: &SeongParams,
    grid: &Arc<Grid>,
    t_len: usize,
    design: Design,
    vartheta: f64,
    rng: &mut ChaCha8Rng,
) -> SimDraw {
    let n = grid.len();
    let f2 = fourier_basis(2, grid);
    let mut xd = DMatrix::zeros(n, t_len);
    let mut zd = DMatrix::zeros(n, t_len);
    let mut u = Vec::with_capacity(t_len);
    let (mut eta, mut vv, mut ee, mut eta2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for t in 0..t_len {
        let a = rng.gen_range(2.0..5.0);
        let b = rng.gen_range(2.0..5.0);
        let dens = beta_density(grid, a, b);
        bridge_into(grid, rng, &mut eta);
        bridge_into(grid, rng, &mut vv);
        bridge_into(grid, rng, &mut ee);
        let z: Vec<f64> = dens.iter().zip(&eta).map(|(d, e)| d + e).collect();
        for i in 0..n {
            xd[(i, t)] = vartheta * z[i] + vv[i];
        }
        let big_u: Vec<f64> = vv.iter().zip(&ee).map(|(v, e)| 0.8 * v + 0.6 * e).collect();
        u.push(grid.dot(&big_u, params.phi.values()));
        match design {
            Design::Informative => zd.column_mut(t).copy_from_slice(&z),
            Design::WeaklyInformative => {
                bridge_into(grid, rng, &mut eta2);
                let c = grid.dot(&z, f2.values());
                for i in 0..n {
                    zd[(i, t)] = c * f2.values()[i] + eta2[i];
                }
            }
        }
    }
    let x = FunctionalSeries::from_parts(grid.clone(), xd);
    let z = FunctionalSeries::from_parts(grid.clone(), zd);
    let fit0 = x.inner_with(&params.theta0).expect("same grid");
    let base = fit0.iter().zip(&u).map(|(f, e)| f + e).collect();
    let signal = x.inner_with(&params.psi).expect("same grid");
    SimDraw {
        z,
        x,
        base,
        signal,
        kappa_scale: 1.0,
        theta0: params.theta0.clone(),
        psi: params.psi.clone(),
    }
}

/// Stream indices inside a replication seed.
const PARAM_STREAM: u64 = 0;
const DATA_STREAM: u64 = 1;
const MEANS_STREAM: u64 = 2;
const MC_STREAM: u64 = 3;

/// Draw for `spec` (parameters and data from `spec.seed`), with `κ` left open.
pub fn draw(spec: &DgpSpec) -> Result<SimDraw> {
    spec.validate()?;
    let grid = spec.grid();
    let mut prng = stream(spec.seed, PARAM_STREAM);
    let mut drng = stream(spec.seed, DATA_STREAM);
    Ok(match spec.family {
        Family::BaselineNoIntercept => {
            let p = BaselineParams::draw(spec.design, &grid, &mut prng);
            simulate_baseline(&p, &grid, spec.t_len, spec.beta_u, &mut drng)
        }
        Family::BaselineIntercept => {
            let p = BaselineParams::draw(spec.design, &grid, &mut prng);
            let mut d = simulate_baseline(&p, &grid, spec.t_len, spec.beta_u, &mut drng);
            Means::draw(&grid, &mut stream(spec.seed, MEANS_STREAM)).apply(&mut d);
            d
        }
        Family::SeongComparison => {
            let p = SeongParams::draw(&grid, &mut prng);
            simulate_seong(&p, &grid, spec.t_len, spec.design, spec.vartheta, &mut drng)
        }
    })
}

fn check_family(spec: &DgpSpec, family: Family) -> Result<()> {
    if spec.family != family {
        return Err(Error::invalid(format!("expected a {family:?} spec, got {:?}", spec.family)));
    }
    Ok(())
}

pub fn gen_baseline(spec: &DgpSpec) -> Result<Sample> {
    check_family(spec, Family::BaselineNoIntercept)?;
    Ok(draw(spec)?.sample(spec.kappa))
}

/// Baseline sample plus random means. Also returns the means.
pub fn gen_baseline_intercept(spec: &DgpSpec) -> Result<(Sample, Means)> {
    check_family(spec, Family::BaselineIntercept)?;
    let d = draw(spec)?;
    let means = Means::draw(&spec.grid(), &mut stream(spec.seed, MEANS_STREAM));
    Ok((d.sample(spec.kappa), means))
}

pub fn gen_seong(spec: &DgpSpec) -> Result<Sample> {
    check_family(spec, Family::SeongComparison)?;
    Ok(draw(spec)?.sample(spec.kappa))
}

/// Population quantities of the baseline design that drive local power.
#[derive(Debug, Clone)]
pub struct PopulationMoments {
    /// `Λ_Zu`; the product `Z_t u_t` is a martingale difference here, so this
    /// is `E[u²] E[Z ⊗ Z]`.
    pub lrv: HilbertOperator,
    /// `C_XZ ψ̄ = E[⟨X_t, ψ̄⟩ Z_t]`.
    pub cross: Curve,
}

/// Estimates [`PopulationMoments`] from one long run with fixed parameters.
pub fn population_moments(
    params: &BaselineParams,
    grid: &Arc<Grid>,
    beta_u: f64,
    periods: usize,
    seed: u64,
) -> Result<PopulationMoments> {
    if periods < 100 {
        return Err(Error::invalid("population moments need a long run"));
    }
    let mut rng = stream(seed, DATA_STREAM);
    let d = simulate_baseline(params, grid, periods, beta_u, &mut rng);
    let zm = d.z.data();
    let tf = periods as f64;
    let u2 = d.base.iter().map(|u| u * u).sum::<f64>() / tf;
    let mut k = DMatrix::zeros(grid.len(), grid.len());
    k.gemm(u2 / tf, zm, &zm.transpose(), 0.0);
    let lrv = HilbertOperator::new(grid.clone(), k)?.symmetrized();
    let s = DVector::from_column_slice(&d.signal);
    let cross = (zm * s) / tf;
    Ok(PopulationMoments {
        lrv,
        cross: Curve::new(grid.clone(), cross.as_slice().to_vec())?,
    })
}

/// A Monte Carlo experiment over a grid of designs and test settings.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub family: Family,
    pub variant: Variant,
    pub designs: Vec<Design>,
    pub betas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub kappas: Vec<f64>,
    pub kernels: Vec<KernelSpec>,
    pub weights: Vec<WeightSpec>,
    pub replications: usize,
    pub base_seed: u64,
    pub grid_size: usize,
    pub mc_draws: usize,
    pub alpha: f64,
    pub d_t: Truncation,
    pub vartheta: f64,
}

/// The weights `p = ∞, 7, 3, 1, 0`.
pub fn standard_weights() -> Vec<WeightSpec> {
    let mut w = vec![WeightSpec::endpoint()];
    for p in [7.0, 3.0, 1.0, 0.0] {
        w.push(WeightSpec::power(p).expect("valid power"));
    }
    w
}

/// Ready-made experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Exogeneity benchmark (`Z = X`) under the null.
    ExogeneityBenchmark,
    /// Local power of the model without intercept.
    Baseline,
    /// Comparison design.
    Comparison,
    /// Local power of the model with intercept.
    BaselineIntercept,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "benchmark" | "exogeneity_benchmark" => Ok(Preset::ExogeneityBenchmark),
            "2" | "baseline" => Ok(Preset::Baseline),
            "3" | "comparison" | "seong" => Ok(Preset::Comparison),
            "a4" | "intercept" | "baseline_intercept" => Ok(Preset::BaselineIntercept),
            other => Err(Error::invalid(format!("unknown experiment preset '{other}'"))),
        }
    }
}

impl Experiment {
    pub fn preset(preset: Preset, replications: usize, base_seed: u64) -> Experiment {
        let base = Experiment {
            family: Family::BaselineNoIntercept,
            variant: Variant::Plain,
            designs: vec![Design::Informative, Design::WeaklyInformative],
            betas: vec![0.1, 0.25],
            sample_sizes: vec![100, 200, 400],
            kappas: vec![0.0, 5.0, 10.0, 20.0],
            kernels: vec![KernelSpec::Bartlett, KernelSpec::Parzen],
            weights: standard_weights(),
            replications,
            base_seed,
            grid_size: DEFAULT_GRID_SIZE,
            mc_draws: 1000,
            alpha: 0.05,
            d_t: Truncation::Auto,
            vartheta: 1.0,
        };
        match preset {
            Preset::Baseline => base,
            Preset::BaselineIntercept => Experiment {
                family: Family::BaselineIntercept,
                variant: Variant::Intercept,
                ..base
            },
            Preset::ExogeneityBenchmark => Experiment {
                variant: Variant::ExogeneityBenchmark,
                designs: vec![Design::Informative],
                betas: vec![0.0, 0.1, 0.25],
                kappas: vec![0.0],
                weights: vec![WeightSpec::endpoint()],
                ..base
            },
            Preset::Comparison => Experiment {
                family: Family::SeongComparison,
                variant: Variant::Intercept,
                betas: vec![0.0],
                kappas: [0.0f64, 0.05, 0.1, 0.15].iter().map(|k2| k2.sqrt()).collect(),
                kernels: vec![KernelSpec::Parzen],
                weights: vec![WeightSpec::endpoint()],
                ..base
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.replications < 100 {
            return Err(Error::invalid("experiments need at least 100 replications"));
        }
        if self.designs.is_empty()
            || self.betas.is_empty()
            || self.sample_sizes.is_empty()
            || self.kappas.is_empty()
            || self.kernels.is_empty()
            || self.weights.is_empty()
        {
            return Err(Error::invalid("every experiment dimension needs at least one value"));
        }
        Ok(())
    }

    fn n_results(&self) -> usize {
        self.betas.len() * self.kappas.len() * self.kernels.len() * self.weights.len()
    }

    fn data_cells(&self) -> Vec<(Design, usize)> {
        let mut v = Vec::new();
        for &d in &self.designs {
            for &t in &self.sample_sizes {
                v.push((d, t));
            }
        }
        v
    }

    /// Rejection indicators of one replication in one `(design, T)` cell,
    /// ordered by `(β, κ, kernel, weight)`; `None` marks a failed test.
    pub fn replicate(&self, cell: usize, design: Design, t_len: usize, rep: usize) -> Vec<Option<bool>> {
        let seed = derive_seed(derive_seed(self.base_seed, cell as u64), rep as u64);
        let mut out = Vec::with_capacity(self.n_results());
        for &beta in &self.betas {
            let spec = DgpSpec {
                family: self.family,
                beta_u: beta,
                design,
                t_len,
                kappa: 0.0,
                seed,
                grid_size: self.grid_size,
                vartheta: self.vartheta,
            };
            let sim = match draw(&spec) {
                Ok(d) => d,
                Err(_) => {
                    out.extend(std::iter::repeat_n(None, self.n_results() / self.betas.len()));
                    continue;
                }
            };
            for &kappa in &self.kappas {
                let y = sim.y(kappa);
                let mut input = TestInput::new(&y, &sim.x).instrument(&sim.z);
                input.theta0 = vec![sim.theta0.clone()];
                for &kernel in &self.kernels {
                    let config = TestConfig {
                        variant: self.variant,
                        weight: self.weights[0].clone(),
                        kernel,
                        alpha: self.alpha,
                        d_t: self.d_t,
                        bandwidth: Bandwidth::default(),
                        mc_draws: self.mc_draws,
                        seed: derive_seed(seed, MC_STREAM),
                    };
                    match PreparedTest::new(&config, &input) {
                        Ok(prep) => {
                            for w in &self.weights {
                                out.push(prep.evaluate(w).ok().map(|r| r.reject));
                            }
                        }
                        Err(_) => out.extend(std::iter::repeat_n(None, self.weights.len())),
                    }
                }
            }
        }
        out
    }
}

/// Rejection rate of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub design: Design,
    pub beta_u: f64,
    pub t_len: usize,
    pub kappa: f64,
    pub kernel: KernelSpec,
    pub weight: String,
    pub drift_factor: f64,
    pub rejections: usize,
    pub valid: usize,
    pub errors: usize,
    /// Percent.
    pub rate: f64,
    /// Binomial standard error in percentage points.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub family: Family,
    pub variant: Variant,
    pub replications: usize,
    pub base_seed: u64,
    pub grid_size: usize,
    pub mc_draws: usize,
    pub alpha: f64,
    pub cells: Vec<CellResult>,
    /// Wall time; left out of the JSON so reruns give identical bytes.
    #[serde(skip)]
    pub runtime_secs: f64,
    pub notes: Vec<String>,
}

pub fn run_experiment(exp: &Experiment) -> Result<ExperimentReport> {
    exp.validate()?;
    let start = Instant::now();
    let cells = exp.data_cells();
    let mut results = Vec::new();
    for (c, &(design, t_len)) in cells.iter().enumerate() {
        let flags: Vec<Vec<Option<bool>>> = (0..exp.replications)
            .into_par_iter()
            .map(|r| exp.replicate(c, design, t_len, r))
            .collect();
        let mut idx = 0;
        for &beta in &exp.betas {
            for &kappa in &exp.kappas {
                for &kernel in &exp.kernels {
                    for w in &exp.weights {
                        let (mut rej, mut valid) = (0, 0);
                        for f in &flags {
                            if let Some(r) = f[idx] {
                                valid += 1;
                                rej += r as usize;
                            }
                        }
                        let p = if valid > 0 { rej as f64 / valid as f64 } else { f64::NAN };
                        results.push(CellResult {
                            design,
                            beta_u: beta,
                            t_len,
                            kappa,
                            kernel,
                            weight: w.label(),
                            drift_factor: w.drift_factor(),
                            rejections: rej,
                            valid,
                            errors: exp.replications - valid,
                            rate: 100.0 * p,
                            std_error: 100.0 * (p * (1.0 - p) / valid.max(1) as f64).sqrt(),
                        });
                        idx += 1;
                    }
                }
            }
        }
    }
    let mut notes = vec![format!(
        "grid of {} points; {} burn-in periods; {} autoregressive Fourier terms",
        exp.grid_size, BURN_IN, J_MAX
    )];
    if exp.family == Family::SeongComparison {
        notes.push(format!("vartheta = {}; kappa column holds sqrt(kappa^2)", exp.vartheta));
    }
    Ok(ExperimentReport {
        family: exp.family,
        variant: exp.variant,
        replications: exp.replications,
        base_seed: exp.base_seed,
        grid_size: exp.grid_size,
        mc_draws: exp.mc_draws,
        alpha: exp.alpha,
        cells: results,
        runtime_secs: start.elapsed().as_secs_f64(),
        notes,
    })
}

impl ExperimentReport {
    /// Rate in percent for a cell, if present.
    pub fn rate(&self, design: Design, beta_u: f64, t_len: usize, kappa: f64, kernel: KernelSpec, weight: &str) -> Option<f64> {
        self.cell(design, beta_u, t_len, kappa, kernel, weight).map(|c| c.rate)
    }

    pub fn cell(
        &self,
        design: Design,
        beta_u: f64,
        t_len: usize,
        kappa: f64,
        kernel: KernelSpec,
        weight: &str,
    ) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.design == design
                && (c.beta_u - beta_u).abs() < 1e-12
                && c.t_len == t_len
                && (c.kappa - kappa).abs() < 1e-12
                && c.kernel == kernel
                && c.weight == weight
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned text tables: one block per design, rows `T × weight`, columns
    /// `β_u × kernel × κ`.
    pub fn to_text(&self) -> String {
        let uniq = |f: &dyn Fn(&CellResult) -> String| {
            let mut v: Vec<String> = Vec::new();
            for c in &self.cells {
                let k = f(c);
                if !v.contains(&k) {
                    v.push(k);
                }
            }
            v
        };
        let kappa_label = |c: &CellResult| {
            if self.family == Family::SeongComparison {
                format!("{:.2}", c.kappa * c.kappa)
            } else {
                format!("{}", c.kappa)
            }
        };
        let designs = uniq(&|c| c.design.label().to_string());
        let cols = uniq(&|c| format!("{}|{}|{}", c.beta_u, c.kernel.name(), kappa_label(c)));
        let rows = uniq(&|c| format!("{}|{}", c.t_len, c.weight));
        let mut out = String::new();
        let kappa_name = if self.family == Family::SeongComparison { "kappa^2" } else { "kappa" };
        out.push_str(&format!(
            "rejection rates (%), {} replications, {:?} family, {:?} test\n",
            self.replications, self.family, self.variant
        ));
        for d in &designs {
            out.push_str(&format!("\n[{d}]\n"));
            out.push_str(&format!("{:>5} {:>9}", "T", "weight"));
            for c in &cols {
                let parts: Vec<&str> = c.split('|').collect();
                out.push_str(&format!(" {:>16}", format!("b={} {} {}", parts[0], &parts[1][..3], parts[2])));
            }
            out.push('\n');
            for r in &rows {
                let rp: Vec<&str> = r.split('|').collect();
                out.push_str(&format!("{:>5} {:>9}", rp[0], rp[1]));
                for c in &cols {
                    let cell = self.cells.iter().find(|x| {
                        x.design.label() == d
                            && format!("{}|{}", x.t_len, x.weight) == *r
                            && format!("{}|{}|{}", x.beta_u, x.kernel.name(), kappa_label(x)) == *c
                    });
                    match cell {
                        Some(x) => out.push_str(&format!(" {:>16.1}", x.rate)),
                        None => out.push_str(&format!(" {:>16}", "-")),
                    }
                }
                out.push('\n');
            }
        }
        out.push_str(&format!("\ncolumns: b = beta_u, kernel, {kappa_name}\n"));
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

/// Local power of several weights along a grid of `κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub weight: String,
    pub drift_factor: f64,
    pub kappas: Vec<f64>,
    pub power: Vec<f64>,
}

/// `π_w(κ) = P(‖G + κ D_w C_XZ ψ̄‖² > q_α)` from population moments, using
/// every eigenpair of `Λ_Zu`.
pub fn local_power_curves(
    moments: &PopulationMoments,
    weights: &[WeightSpec],
    kappas: &[f64],
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<PowerCurve>> {
    let eig = crate::hilbert::sym_eig(&moments.lrv)?;
    let lambdas: Vec<f64> = eig.values.iter().map(|l| l.max(0.0)).collect();
    weights
        .iter()
        .map(|w| {
            let power = kappas
                .iter()
                .map(|&k| {
                    let shift = moments.cross.scale(k * w.drift_factor());
                    crate::critical::local_power(&lambdas, &eig.vectors, &shift, alpha, draws, seed)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(PowerCurve {
                weight: w.label(),
                drift_factor: w.drift_factor(),
                kappas: kappas.to_vec(),
                power,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::inner_product;

    fn spec(family: Family, design: Design, t: usize, seed: u64) -> DgpSpec {
        DgpSpec {
            seed,
            ..DgpSpec::new(family, design, t)
        }
    }

    #[test]
    fn bridge_pins_and_variance() {
        let g = Grid::uniform(21);
        let mut rng = stream(1, 0);
        let mut acc = 0.0;
        let n = 50_000;
        for _ in 0..n {
            let b = brownian_bridge(&g, &mut rng);
            assert_eq!(b[0], 0.0);
            assert_eq!(b[20], 0.0);
            acc += b[10] * b[10];
        }
        let var = acc / n as f64;
        assert!((var / 0.25 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn null_dgp_has_y_equal_u() {
        let s = spec(Family::BaselineNoIntercept, Design::Informative, 50, 3);
        let d = draw(&s).unwrap();
        let sample = gen_baseline(&s).unwrap();
        assert_eq!(sample.y.values(), &d.base[..]);
        let alt = d.y(10.0);
        let expected: Vec<f64> = d.base.iter().zip(&d.signal).map(|(u, x)| u + 10.0 / 50f64.sqrt() * x).collect();
        assert_eq!(alt.values(), &expected[..]);
    }

    #[test]
    fn endogeneity_shows_in_first_coefficient() {
        let corr = |beta: f64| {
            let mut cs: Vec<f64> = (0..20)
                .map(|seed| {
                    let s = DgpSpec {
                        beta_u: beta,
                        grid_size: 41,
                        ..spec(Family::BaselineNoIntercept, Design::Informative, 2000, seed)
                    };
                    let d = draw(&s).unwrap();
                    let f1 = fourier_basis(1, d.x.grid());
                    let c = d.x.inner_with(&f1).unwrap();
                    pearson(&c, &d.base)
                })
                .collect();
            cs.sort_by(f64::total_cmp);
            cs[10]
        };
        assert!(corr(0.0).abs() < 0.1);
        assert!(corr(0.25) > 0.05);
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn weak_design_zeroes_most_loadings() {
        let g = Grid::uniform(21);
        for seed in 0..50 {
            let p = BaselineParams::draw(Design::WeaklyInformative, &g, &mut stream(seed, 0));
            assert!((1..=4).contains(&p.relevant.len()));
            assert!(p.relevant.iter().all(|j| (1..=5).contains(j)));
            let nonzero = p.loadings.iter().filter(|&&b| b != 0.0).count();
            assert_eq!(nonzero, p.relevant.len());
            assert!((norm(&p.psi) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn intercept_sample_is_shifted_baseline() {
        let s = spec(Family::BaselineIntercept, Design::Informative, 40, 8);
        let (with_means, means) = gen_baseline_intercept(&s).unwrap();
        let plain = gen_baseline(&DgpSpec {
            family: Family::BaselineNoIntercept,
            ..s.clone()
        })
        .unwrap();
        for t in 0..40 {
            assert!((with_means.y.values()[t] - means.y - plain.y.values()[t]).abs() < 1e-12);
            for i in 0..s.grid_size {
                assert!((with_means.x.values(t)[i] - means.x.values()[i] - plain.x.values(t)[i]).abs() < 1e-12);
                assert!((with_means.z.values(t)[i] - means.z.values()[i] - plain.z.values(t)[i]).abs() < 1e-12);
            }
        }
        assert!((norm(&means.x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_density_integrates_to_one() {
        let g = Grid::uniform(101);
        let d = beta_density(&g, 2.0, 2.0);
        assert!((g.integrate(&d) - 1.0).abs() < 1e-3);
        // Beta(2,2) density is 6s(1−s)
        assert!((d[50] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn seong_sample_structure() {
        let s = spec(Family::SeongComparison, Design::WeaklyInformative, 30, 2);
        let d = draw(&s).unwrap();
        let f2 = fourier_basis(2, d.z.grid());
        // Z° minus its f₂ component is a pinned bridge
        for t in 0..30 {
            assert_eq!(d.z.values(t)[0], 0.0);
            assert!(d.z.values(t)[s.grid_size - 1].abs() < 1e-12);
        }
        let _ = inner_product(&d.z.curve(0), &f2).unwrap();
        let sample = gen_seong(&DgpSpec { kappa: 0.3, ..s.clone() }).unwrap();
        let expected: Vec<f64> = d.base.iter().zip(&d.signal).map(|(b, x)| b + 0.3 * x).collect();
        assert_eq!(sample.y.values(), &expected[..]);
        assert!(gen_seong(&spec(Family::BaselineNoIntercept, Design::Informative, 30, 2)).is_err());
    }

    #[test]
    fn ar_recursion_is_stationary_after_burn_in() {
        // thinned draws pooled over replications, first half against second half
        let g = Grid::uniform(21);
        let (mut early, mut late) = (Vec::new(), Vec::new());
        for rep in 0..60 {
            let p = BaselineParams::draw(Design::Informative, &g, &mut stream(rep, 0));
            let d = simulate_baseline(&p, &g, 2000, 0.1, &mut stream(rep, 1));
            for t in (0..2000).step_by(20) {
                let n = norm(&d.x.curve(t));
                if t < 1000 {
                    early.push(n)
                } else {
                    late.push(n)
                }
            }
        }
        let ks = ks_two_sample(early, late);
        assert!(ks <= 0.05, "{ks}");
    }

    #[test]
    fn uncentered_test_fails_under_means() {
        let mut exp = Experiment::preset(Preset::BaselineIntercept, 100, 9);
        exp.designs = vec![Design::Informative];
        exp.sample_sizes = vec![200];
        exp.betas = vec![0.1];
        exp.kappas = vec![0.0];
        exp.kernels = vec![KernelSpec::Bartlett];
        exp.weights = vec![WeightSpec::endpoint()];
        exp.grid_size = 41;
        let centered = run_experiment(&exp).unwrap().cells[0].rate;
        exp.variant = Variant::Plain;
        let plain = run_experiment(&exp).unwrap().cells[0].rate;
        assert!(plain > 10.0, "{plain}");
        assert!(centered < plain, "{centered} {plain}");
    }

    fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn experiment_is_deterministic_and_complete() {
        let mut exp = Experiment::preset(Preset::Baseline, 100, 5);
        exp.sample_sizes = vec![30];
        exp.designs = vec![Design::Informative];
        exp.betas = vec![0.1];
        exp.kappas = vec![0.0, 20.0];
        exp.kernels = vec![KernelSpec::Bartlett];
        exp.grid_size = 21;
        let a = run_experiment(&exp).unwrap();
        let b = run_experiment(&exp).unwrap();
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.cells.len(), 2 * 5);
        assert!(a.cells.iter().all(|c| c.valid == 100 && (0.0..=100.0).contains(&c.rate)));
        let r0 = a.rate(Design::Informative, 0.1, 30, 0.0, KernelSpec::Bartlett, "endpoint").unwrap();
        let r20 = a.rate(Design::Informative, 0.1, 30, 20.0, KernelSpec::Bartlett, "endpoint").unwrap();
        assert!(r20 > r0);
        let text = a.to_text();
        assert!(text.contains("endpoint") && text.contains("p=7"));
        let json: ExperimentReport = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(json.cells.len(), a.cells.len());
        exp.replications = 10;
        assert!(run_experiment(&exp).is_err());
    }

    #[test]
    fn presets_parse() {
        assert_eq!("2".parse::<Preset>().unwrap(), Preset::Baseline);
        assert_eq!("1".parse::<Preset>().unwrap(), Preset::ExogeneityBenchmark);
        assert_eq!("3".parse::<Preset>().unwrap(), Preset::Comparison);
        assert_eq!("a4".parse::<Preset>().unwrap(), Preset::BaselineIntercept);
        assert!("9".parse::<Preset>().is_err());
        let c = Experiment::preset(Preset::Comparison, 100, 0);
        assert!((c.kappas[2] * c.kappas[2] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn population_moments_and_power_curves() {
        let g = Grid::uniform(41);
        let p = BaselineParams::draw(Design::Informative, &g, &mut stream(4, 0));
        let m = population_moments(&p, &g, 0.1, 5000, 4).unwrap();
        assert!(m.lrv.asymmetry() < 1e-12);
        assert!(norm(&m.cross) > 0.0);
        let weights = vec![WeightSpec::endpoint(), WeightSpec::power(0.0).unwrap()];
        let curves = local_power_curves(&m, &weights, &[0.0, 5.0, 10.0], 0.05, 20_000, 1).unwrap();
        assert!((curves[0].power[0] - 0.05).abs() < 0.01);
        for (a, b) in curves[0].power.iter().zip(&curves[1].power) {
            assert!(a >= b);
        }
        assert!(curves[0].power.windows(2).all(|w| w[1] >= w[0]));
    }
}
