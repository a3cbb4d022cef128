//! Densities as functional regressors: transforms, moments and lagged
//! auxiliary series.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{FunctionalSeries, Grid};

/// Floor applied before taking logs of densities and CDF values.
pub const LOG_FLOOR: f64 = 1e-10;
/// Number of quantile levels for the QF transform.
pub const QF_POINTS: usize = 101;
pub const QF_LOWER: f64 = 0.005;
pub const QF_UPPER: f64 = 0.995;

/// A sequence of densities on a common support grid `[a, b]`.
#[derive(Debug, Clone)]
pub struct DensitySample {
    points: Vec<f64>,
    /// `n × T`.
    values: DMatrix<f64>,
    renormalized: Vec<usize>,
}

fn trapezoid(points: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    points
        .windows(2)
        .enumerate()
        .map(|(i, w)| 0.5 * (w[1] - w[0]) * (f(i) + f(i + 1)))
        .sum()
}

impl DensitySample {
    /// Builds the sample from support points and one row of density values
    /// per period. Rows whose integral is off by more than 1% are rescaled.
    pub fn new(points: Vec<f64>, rows: &[Vec<f64>]) -> Result<DensitySample> {
        if points.len() < 3 {
            return Err(Error::invalid("density support needs at least three points"));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("density support must be finite and strictly increasing"));
        }
        if rows.is_empty() {
            return Err(Error::invalid("no densities supplied"));
        }
        let n = points.len();
        let mut values = DMatrix::zeros(n, rows.len());
        let mut renormalized = Vec::new();
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Parse {
                    row: t + 1,
                    message: format!("expected {n} density values, found {}", row.len()),
                });
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Parse {
                    row: t + 1,
                    message: "density values must be finite and nonnegative".into(),
                });
            }
            let mass = trapezoid(&points, |i| row[i]);
            if mass <= 0.0 {
                return Err(Error::Parse {
                    row: t + 1,
                    message: "density is identically zero".into(),
                });
            }
            let scale = if (0.99..=1.01).contains(&mass) {
                1.0
            } else {
                log::warn!("density in row {} integrates to {mass:.4}; renormalized", t + 1);
                renormalized.push(t + 1);
                1.0 / mass
            };
            for i in 0..n {
                values[(i, t)] = row[i] * scale;
            }
        }
        Ok(DensitySample {
            points,
            values,
            renormalized,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.points[0], *self.points.last().unwrap())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn density(&self, t: usize) -> &[f64] {
        let n = self.points.len();
        &self.values.as_slice()[t * n..(t + 1) * n]
    }

    /// Data rows (1-based) rescaled on construction.
    pub fn renormalized_rows(&self) -> &[usize] {
        &self.renormalized
    }

    /// The support mapped affinely onto `[0, 1]`.
    pub fn unit_grid(&self) -> Result<Arc<Grid>> {
        let (a, b) = self.support();
        let mut pts: Vec<f64> = self.points.iter().map(|p| (p - a) / (b - a)).collect();
        pts[0] = 0.0;
        *pts.last_mut().unwrap() = 1.0;
        Grid::new(pts)
    }

    /// CDF by cumulative trapezoid, scaled to end exactly at 1.
    pub fn cdf(&self, t: usize) -> Vec<f64> {
        let p = self.density(t);
        let mut out = vec![0.0; p.len()];
        for i in 1..p.len() {
            out[i] = out[i - 1] + 0.5 * (self.points[i] - self.points[i - 1]) * (p[i] + p[i - 1]);
        }
        let total = out[p.len() - 1];
        for v in out.iter_mut() {
            *v /= total;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `log p(s) − ∫ log p`.
    Clr,
    /// Log hazard `log p − log(1 − P)`.
    Lhr,
    /// Log reversed hazard `log p − log P`.
    Lrhr,
    /// Logit CDF `log P − log(1 − P)`.
    Lcdf,
    Pdf,
    /// Quantile function on levels in `(0.005, 0.995)`.
    Qf,
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clr" => Ok(TransformKind::Clr),
            "lhr" => Ok(TransformKind::Lhr),
            "lrhr" => Ok(TransformKind::Lrhr),
            "lcdf" => Ok(TransformKind::Lcdf),
            "pdf" => Ok(TransformKind::Pdf),
            "qf" => Ok(TransformKind::Qf),
            other => Err(Error::invalid(format!("unknown transform '{other}'"))),
        }
    }
}

/// Quantile levels used by [`TransformKind::Qf`].
pub fn qf_levels() -> Vec<f64> {
    (0..QF_POINTS)
        .map(|k| QF_LOWER + (QF_UPPER - QF_LOWER) * k as f64 / (QF_POINTS - 1) as f64)
        .collect()
}

/// `inf{x : P(x) ≥ s}` for the piecewise linear CDF through `(points, cdf)`.
pub fn quantile(points: &[f64], cdf: &[f64], s: f64) -> f64 {
    let i = cdf.partition_point(|&c| c < s);
    if i == 0 {
        return points[0];
    }
    if i >= cdf.len() {
        return *points.last().unwrap();
    }
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    points[i - 1] + (s - c0) / (c1 - c0) * (points[i] - points[i - 1])
}

fn floored_ln(v: f64, hits: &mut usize) -> f64 {
    if v < LOG_FLOOR {
        *hits += 1;
        LOG_FLOOR.ln()
    } else {
        v.ln()
    }
}

/// Transforms every density into a curve on `[0, 1]`. Except for QF, values
/// sit on the affinely mapped support grid. QF values are support points, on
/// a uniform grid whose `k`-th point stands for level `qf_levels()[k]`.
pub fn transform(d: &DensitySample, kind: TransformKind) -> Result<FunctionalSeries> {
    let t_len = d.len();
    let mut hits = 0usize;
    let (grid, data) = if kind == TransformKind::Qf {
        let levels = qf_levels();
        let mut data = DMatrix::zeros(QF_POINTS, t_len);
        for t in 0..t_len {
            let cdf = d.cdf(t);
            if cdf.windows(2).any(|w| w[1] < w[0]) || !cdf.iter().all(|c| c.is_finite()) {
                return Err(Error::Parse {
                    row: t + 1,
                    message: "CDF is not monotone".into(),
                });
            }
            for (k, s) in levels.iter().enumerate() {
                data[(k, t)] = quantile(d.points(), &cdf, *s);
            }
        }
        (Grid::uniform(QF_POINTS), data)
    } else {
        let grid = d.unit_grid()?;
        let n = grid.len();
        let mut data = DMatrix::zeros(n, t_len);
        for t in 0..t_len {
            let p = d.density(t);
            let cdf = d.cdf(t);
            let col: Vec<f64> = match kind {
                TransformKind::Pdf => p.to_vec(),
                TransformKind::Clr => {
                    let logs: Vec<f64> = p.iter().map(|&v| floored_ln(v, &mut hits)).collect();
                    let centre = grid.integrate(&logs);
                    logs.iter().map(|l| l - centre).collect()
                }
                TransformKind::Lhr => (0..n)
                    .map(|i| floored_ln(p[i], &mut hits) - floored_ln(1.0 - cdf[i], &mut hits))
                    .collect(),
                TransformKind::Lrhr => (0..n)
                    .map(|i| floored_ln(p[i], &mut hits) - floored_ln(cdf[i], &mut hits))
                    .collect(),
                TransformKind::Lcdf => (0..n)
                    .map(|i| floored_ln(cdf[i], &mut hits) - floored_ln(1.0 - cdf[i], &mut hits))
                    .collect(),
                TransformKind::Qf => unreachable!(),
            };
            data.column_mut(t).copy_from_slice(&col);
        }
        (grid, data)
    };
    if hits > 0 {
        log::warn!("{kind:?} transform: log floor {LOG_FLOOR:e} applied at {hits} points");
    }
    FunctionalSeries::new(grid, data)
}

/// Mean, standard deviation, skewness and kurtosis (the first `k`) of each
/// density, by trapezoid quadrature on its support.
pub fn standardized_moments(d: &DensitySample, k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 || k > 4 {
        return Err(Error::invalid("between one and four moments are supported"));
    }
    let pts = d.points();
    (0..d.len())
        .map(|t| {
            let p = d.density(t);
            let mass = trapezoid(pts, |i| p[i]);
            let mean = trapezoid(pts, |i| pts[i] * p[i]) / mass;
            let central = |j: i32| trapezoid(pts, |i| (pts[i] - mean).powi(j) * p[i]) / mass;
            let sd = central(2).sqrt();
            if k >= 2 && !(sd > 0.0) {
                return Err(Error::Parse {
                    row: t + 1,
                    message: "density has zero variance".into(),
                });
            }
            let mut out = vec![mean];
            for j in 2..=k as i32 {
                out.push(if j == 2 { sd } else { central(j) / sd.powi(j) });
            }
            Ok(out)
        })
        .collect()
}

/// `Z_t = Σ_{j=1}^{ℓ} decay^{j−1} X_{t−j}` for `t = ℓ+1..T`. Row `k` of the
/// output pairs with original period `ℓ + k + 1` (1-based).
pub fn build_lagged_auxiliary(x: &FunctionalSeries, ell: usize, decay: f64) -> Result<FunctionalSeries> {
    let t_len = x.len();
    if ell == 0 {
        return Err(Error::invalid("the lag order must be at least 1"));
    }
    if ell >= t_len {
        return Err(Error::invalid(format!("lag order {ell} leaves no observations out of T = {t_len}")));
    }
    let n = x.grid().len();
    let src = x.data();
    let mut out = DMatrix::zeros(n, t_len - ell);
    for (k, t) in (ell..t_len).enumerate() {
        let mut w = 1.0;
        for j in 1..=ell {
            out.column_mut(k).axpy(w, &src.column(t - j), 1.0);
            w *= decay;
        }
    }
    FunctionalSeries::new(x.grid().clone(), out)
}
