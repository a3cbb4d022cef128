//! Partial-sum moment processes.
//!
//! The basic object is the step process
//! `S(i/T) = T⁻¹ Σ_{t ≤ i} Z_t (y_t − ⟨X_t, θ₀⟩)`, evaluated on the natural
//! partition `i = 0, …, T`. The variants here differ only in how `y`, `X` and
//! `Z` are preprocessed (sample-centered, residualized on scalar covariates) or
//! in how the null residual is formed (several functional regressors).

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{check_grid, Curve, FunctionalSeries, Grid, ScalarSeries};

/// Condition-number ceiling for the covariate Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// `S(i/T)` for `i = 0..=T`, stored as an `n × (T+1)` matrix.
#[derive(Debug, Clone)]
pub struct MomentProcess {
    grid: Arc<Grid>,
    values: DMatrix<f64>,
}

impl MomentProcess {
    /// Cumulative sums `T⁻¹ Σ_{t ≤ i} v_t` of a product series `v_t = Z_t u_t`.
    pub fn from_products(v: &FunctionalSeries) -> MomentProcess {
        let t_len = v.len();
        let n = v.grid().len();
        let inv_t = 1.0 / t_len as f64;
        let mut values = DMatrix::zeros(n, t_len + 1);
        let src = v.data();
        for t in 0..t_len {
            for k in 0..n {
                values[(k, t + 1)] = values[(k, t)] + src[(k, t)] * inv_t;
            }
        }
        MomentProcess {
            grid: v.grid().clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Sample size `T`.
    pub fn sample_size(&self) -> usize {
        self.values.ncols() - 1
    }

    /// Values of `S(i/T)`.
    pub fn at(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values.as_slice()[i * n..(i + 1) * n]
    }

    pub fn curve(&self, i: usize) -> Curve {
        Curve::from_parts(self.grid.clone(), self.at(i).to_vec())
    }

    /// `S(1)`.
    pub fn endpoint(&self) -> Curve {
        self.curve(self.sample_size())
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

fn check_lengths(z: &FunctionalSeries, y: &ScalarSeries, x: &FunctionalSeries) -> Result<()> {
    check_grid(z.grid(), x.grid())?;
    if y.len() != z.len() {
        return Err(Error::LengthMismatch {
            what: "y",
            got: y.len(),
            expected: z.len(),
        });
    }
    if x.len() != z.len() {
        return Err(Error::LengthMismatch {
            what: "X",
            got: x.len(),
            expected: z.len(),
        });
    }
    if z.len() < 2 {
        return Err(Error::invalid("at least two periods are required"));
    }
    Ok(())
}

/// Null residuals `u_{0,t} = y_t − ⟨X_t, θ₀⟩`.
pub fn null_residuals(y: &ScalarSeries, x: &FunctionalSeries, theta0: &Curve) -> Result<Vec<f64>> {
    let fitted = x.inner_with(theta0)?;
    Ok(y.values().iter().zip(fitted).map(|(a, b)| a - b).collect())
}

pub fn moment_process(
    z: &FunctionalSeries,
    y: &ScalarSeries,
    x: &FunctionalSeries,
    theta0: &Curve,
) -> Result<MomentProcess> {
    check_lengths(z, y, x)?;
    check_grid(z.grid(), theta0.grid())?;
    let u0 = null_residuals(y, x, theta0)?;
    Ok(MomentProcess::from_products(&z.scale_by(&u0)?))
}

/// Moment process built from fully sample-centered `y`, `X` and `Z`.
pub fn centered_moment_process(
    z: &FunctionalSeries,
    y: &ScalarSeries,
    x: &FunctionalSeries,
    theta0: &Curve,
) -> Result<MomentProcess> {
    check_lengths(z, y, x)?;
    check_grid(z.grid(), theta0.grid())?;
    let (zc, uc) = centered_inputs(z, y, x, theta0)?;
    Ok(MomentProcess::from_products(&zc.scale_by(&uc)?))
}

/// `(Z_t − Z̄, (y_t − ȳ) − ⟨X_t − X̄, θ₀⟩)`.
pub(crate) fn centered_inputs(
    z: &FunctionalSeries,
    y: &ScalarSeries,
    x: &FunctionalSeries,
    theta0: &Curve,
) -> Result<(FunctionalSeries, Vec<f64>)> {
    let u0 = null_residuals(y, x, theta0)?;
    let m = u0.iter().sum::<f64>() / u0.len() as f64;
    let uc = u0.into_iter().map(|u| u - m).collect();
    Ok((z.demeaned(), uc))
}

/// Least-squares projection of a series onto the span of scalar covariates.
#[derive(Debug, Clone)]
pub struct Residualization<S, C> {
    pub fitted: S,
    pub residuals: S,
    /// One coefficient per covariate: a real for scalar targets, a curve for
    /// functional ones.
    pub coefficients: Vec<C>,
}

/// Solves least-squares projections onto a fixed set of covariates.
#[derive(Debug, Clone)]
pub struct CovariateProjector {
    /// `T × K` design.
    design: DMatrix<f64>,
    /// Inverse of the sample Gram matrix `T⁻¹ Σ ϖ_t ϖ_tᵀ`.
    gram_inv: DMatrix<f64>,
}

impl CovariateProjector {
    pub fn new(covariates: &[ScalarSeries], t_len: usize) -> Result<CovariateProjector> {
        let k = covariates.len();
        for c in covariates {
            if c.len() != t_len {
                return Err(Error::LengthMismatch {
                    what: "covariate",
                    got: c.len(),
                    expected: t_len,
                });
            }
        }
        let design = DMatrix::from_fn(t_len, k, |t, j| covariates[j].values()[t]);
        if k == 0 {
            return Ok(CovariateProjector {
                design,
                gram_inv: DMatrix::zeros(0, 0),
            });
        }
        let gram = design.tr_mul(&design) / t_len as f64;
        let ev = gram.clone().symmetric_eigenvalues();
        let max = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= MAX_GRAM_CONDITION) {
            return Err(Error::SingularCovariates { condition });
        }
        let gram_inv = gram
            .try_inverse()
            .ok_or(Error::SingularCovariates { condition })?;
        Ok(CovariateProjector { design, gram_inv })
    }

    pub fn n_covariates(&self) -> usize {
        self.design.ncols()
    }

    pub fn sample_size(&self) -> usize {
        self.design.nrows()
    }

    /// Coefficients for a `T × m` block of targets (one column per target
    /// coordinate); result is `K × m`.
    fn coefficients(&self, targets: &DMatrix<f64>) -> DMatrix<f64> {
        let cross = self.design.tr_mul(targets) / self.sample_size() as f64;
        &self.gram_inv * cross
    }

    pub fn residualize_scalar(&self, y: &ScalarSeries) -> Result<Residualization<ScalarSeries, f64>> {
        if y.len() != self.sample_size() {
            return Err(Error::LengthMismatch {
                what: "target",
                got: y.len(),
                expected: self.sample_size(),
            });
        }
        let target = DMatrix::from_column_slice(y.len(), 1, y.values());
        let beta = self.coefficients(&target);
        let fitted = &self.design * &beta;
        let residuals = &target - &fitted;
        Ok(Residualization {
            fitted: ScalarSeries::from_parts(fitted.as_slice().to_vec()),
            residuals: ScalarSeries::from_parts(residuals.as_slice().to_vec()),
            coefficients: beta.as_slice().to_vec(),
        })
    }

    pub fn residualize_functional(
        &self,
        x: &FunctionalSeries,
    ) -> Result<Residualization<FunctionalSeries, Curve>> {
        if x.len() != self.sample_size() {
            return Err(Error::LengthMismatch {
                what: "target",
                got: x.len(),
                expected: self.sample_size(),
            });
        }
        // rows = periods, columns = grid points
        let target = x.data().transpose();
        let beta = self.coefficients(&target);
        let fitted = (&self.design * &beta).transpose();
        let residuals = x.data() - &fitted;
        let grid = x.grid().clone();
        let coefficients = (0..beta.nrows())
            .map(|j| {
                let row: Vec<f64> = beta.row(j).iter().cloned().collect();
                Curve::from_parts(grid.clone(), row)
            })
            .collect();
        Ok(Residualization {
            fitted: FunctionalSeries::from_parts(grid.clone(), fitted),
            residuals: FunctionalSeries::from_parts(grid, residuals),
            coefficients,
        })
    }
}

/// Targets that can be projected onto scalar covariates.
pub trait Residualize: Sized {
    type Coefficient;
    fn residualize_with(
        &self,
        projector: &CovariateProjector,
    ) -> Result<Residualization<Self, Self::Coefficient>>;
    fn periods(&self) -> usize;
}

impl Residualize for ScalarSeries {
    type Coefficient = f64;
    fn residualize_with(&self, p: &CovariateProjector) -> Result<Residualization<Self, f64>> {
        p.residualize_scalar(self)
    }
    fn periods(&self) -> usize {
        self.len()
    }
}

impl Residualize for FunctionalSeries {
    type Coefficient = Curve;
    fn residualize_with(&self, p: &CovariateProjector) -> Result<Residualization<Self, Curve>> {
        p.residualize_functional(self)
    }
    fn periods(&self) -> usize {
        self.len()
    }
}

/// Residualizes a scalar or functional series on the given covariates.
pub fn residualize_scalar<S: Residualize>(
    target: &S,
    covariates: &[ScalarSeries],
) -> Result<Residualization<S, S::Coefficient>> {
    let p = CovariateProjector::new(covariates, target.periods())?;
    target.residualize_with(&p)
}

/// `(Z_t − Ẑ_t, (y_t − ŷ_t) − ⟨X_t − X̂_t, θ₀⟩)`.
pub(crate) fn residualized_inputs(
    z: &FunctionalSeries,
    y: &ScalarSeries,
    x: &FunctionalSeries,
    theta0: &Curve,
    covariates: &[ScalarSeries],
) -> Result<(FunctionalSeries, Vec<f64>)> {
    let p = CovariateProjector::new(covariates, z.len())?;
    let zr = p.residualize_functional(z)?.residuals;
    // residualization is linear, so projecting u₀ directly equals projecting y and X
    let u0 = ScalarSeries::from_parts(null_residuals(y, x, theta0)?);
    let ur = p.residualize_scalar(&u0)?.residuals;
    Ok((zr, ur.values().to_vec()))
}

pub fn residualized_moment_process(
    z: &FunctionalSeries,
    y: &ScalarSeries,
    x: &FunctionalSeries,
    theta0: &Curve,
    covariates: &[ScalarSeries],
) -> Result<MomentProcess> {
    check_lengths(z, y, x)?;
    check_grid(z.grid(), theta0.grid())?;
    let (zr, ur) = residualized_inputs(z, y, x, theta0, covariates)?;
    Ok(MomentProcess::from_products(&zr.scale_by(&ur)?))
}

/// `u_t = y_t − Σ_j ⟨X_{j,t}, θ_{0,j}⟩`.
pub fn multi_null_residuals(
    y: &ScalarSeries,
    xs: &[FunctionalSeries],
    theta0s: &[Curve],
) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::invalid("at least one functional regressor is required"));
    }
    if xs.len() != theta0s.len() {
        return Err(Error::LengthMismatch {
            what: "null slopes",
            got: theta0s.len(),
            expected: xs.len(),
        });
    }
    let mut u = y.values().to_vec();
    for (x, th) in xs.iter().zip(theta0s) {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                what: "X_j",
                got: x.len(),
                expected: y.len(),
            });
        }
        for (ut, f) in u.iter_mut().zip(x.inner_with(th)?) {
            *ut -= f;
        }
    }
    Ok(u)
}

pub fn multi_moment_process(
    z: &FunctionalSeries,
    y: &ScalarSeries,
    xs: &[FunctionalSeries],
    theta0s: &[Curve],
) -> Result<MomentProcess> {
    for x in xs {
        check_lengths(z, y, x)?;
    }
    let u = multi_null_residuals(y, xs, theta0s)?;
    Ok(MomentProcess::from_products(&z.scale_by(&u)?))
}

/// Pointwise product `Z_t u_t` as a series; the input to the long-run
/// covariance estimator.
pub fn product_series(z: &FunctionalSeries, u: &[f64]) -> Result<FunctionalSeries> {
    z.scale_by(u)
}
