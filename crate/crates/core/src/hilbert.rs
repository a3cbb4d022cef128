//! Discretized `L²[0,1]` primitives.
//!
//! Every curve is stored as its values on a shared [`Grid`]. Integrals use the
//! trapezoid rule, so the inner product is `⟨f, g⟩ = Σ_i w_i f_i g_i` with
//! quadrature weights `w_i` summing to one.
//!
//! Linear operators are stored through their kernel matrix `K`, acting as
//! `(A v)(x_i) = Σ_j K_ij w_j v_j`. The tensor product `f ⊗ g`, i.e. the map
//! `u ↦ ⟨f, u⟩ g`, has kernel `K_ij = g_i f_j`. Spectral work is carried out on
//! the symmetric matrix `W^{1/2} K W^{1/2}`, whose eigenvalues coincide with
//! those of the discretized operator and whose eigenvectors map back to
//! quadrature-orthonormal curves through `W^{-1/2}`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Ascending evaluation points on `[0, 1]` together with trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Grid from explicit points. The points must start at 0, end at 1 and be
    /// strictly increasing.
    pub fn new(points: Vec<f64>) -> Result<Arc<Grid>> {
        if points.len() < 2 {
            return Err(Error::invalid("a grid needs at least two points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("grid points"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid points must be strictly increasing"));
        }
        let (first, last) = (points[0], points[points.len() - 1]);
        if first.abs() > 1e-12 || (last - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "grid must span [0, 1], got [{first}, {last}]"
            )));
        }
        let weights = trapezoid_weights(&points);
        Ok(Arc::new(Grid { points, weights }))
    }

    /// `n` equally spaced points `0, 1/(n-1), …, 1`.
    pub fn uniform(n: usize) -> Arc<Grid> {
        assert!(n >= 2, "a uniform grid needs at least two points");
        let points = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Grid::new(points).expect("uniform grid is valid")
    }

    /// Degenerate one-point grid with unit weight. Curves on it behave like
    /// real numbers, which is convenient for checking scalar special cases.
    pub fn singleton() -> Arc<Grid> {
        Arc::new(Grid {
            points: vec![0.0],
            weights: vec![1.0],
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature of a sampled function.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Weighted dot product of two value slices.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }
}

fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let half = 0.5 * (points[i + 1] - points[i]);
        w[i] += half;
        w[i + 1] += half;
    }
    w
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || a.as_ref() == b.as_ref()
}

pub fn check_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if same_grid(a, b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// An element of `L²[0,1]` sampled on a grid.
#[derive(Debug, Clone)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Curve> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "curve values",
                got: values.len(),
                expected: grid.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("curve values"));
        }
        Ok(Curve { grid, values })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<f64>) -> Curve {
        debug_assert_eq!(grid.len(), values.len());
        Curve { grid, values }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Curve {
        Curve::from_parts(grid.clone(), vec![0.0; grid.len()])
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Curve {
        Curve::from_parts(grid.clone(), vec![c; grid.len()])
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(f64) -> f64) -> Curve {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        Curve::from_parts(grid.clone(), values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scale(&self, c: f64) -> Curve {
        Curve::from_parts(self.grid.clone(), self.values.iter().map(|v| c * v).collect())
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        check_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Curve::from_parts(self.grid.clone(), values))
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        check_grid(&self.grid, &other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Curve::from_parts(self.grid.clone(), values))
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Curve) -> Result<Curve> {
        check_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Curve::from_parts(self.grid.clone(), values))
    }
}

/// `⟨f, g⟩` by trapezoid quadrature.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    check_grid(&f.grid, &g.grid)?;
    Ok(f.grid.dot(&f.values, &g.values))
}

pub fn norm(f: &Curve) -> f64 {
    f.grid.dot(&f.values, &f.values).max(0.0).sqrt()
}

/// The `j`-th standard Fourier basis function (1-based): `f_1 = 1`,
/// `f_{2k} = √2 sin(2πkx)`, `f_{2k+1} = √2 cos(2πkx)`.
pub fn fourier_basis(j: usize, grid: &Arc<Grid>) -> Curve {
    Curve::from_fn(grid, |x| fourier_value(j, x))
}

pub fn fourier_value(j: usize, x: f64) -> f64 {
    assert!(j >= 1, "Fourier basis index is 1-based");
    if j == 1 {
        return 1.0;
    }
    let k = (j / 2) as f64;
    if j.is_multiple_of(2) {
        2f64.sqrt() * (2.0 * PI * k * x).sin()
    } else {
        2f64.sqrt() * (2.0 * PI * k * x).cos()
    }
}

/// Linear operator on grid space, stored by its kernel matrix.
#[derive(Debug, Clone)]
pub struct HilbertOperator {
    grid: Arc<Grid>,
    kernel: DMatrix<f64>,
}

impl HilbertOperator {
    pub fn new(grid: Arc<Grid>, kernel: DMatrix<f64>) -> Result<HilbertOperator> {
        let n = grid.len();
        if kernel.nrows() != n || kernel.ncols() != n {
            return Err(Error::LengthMismatch {
                what: "operator kernel",
                got: kernel.nrows().max(kernel.ncols()),
                expected: n,
            });
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operator kernel"));
        }
        Ok(HilbertOperator { grid, kernel })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, kernel: DMatrix<f64>) -> HilbertOperator {
        HilbertOperator { grid, kernel }
    }

    pub fn zeros(grid: &Arc<Grid>) -> HilbertOperator {
        let n = grid.len();
        HilbertOperator::from_parts(grid.clone(), DMatrix::zeros(n, n))
    }

    /// The identity map. Its kernel is `diag(1 / w_i)`.
    pub fn identity(grid: &Arc<Grid>) -> HilbertOperator {
        let diag = DVector::from_iterator(grid.len(), grid.weights().iter().map(|w| 1.0 / w));
        HilbertOperator::from_parts(grid.clone(), DMatrix::from_diagonal(&diag))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn scale(&self, c: f64) -> HilbertOperator {
        HilbertOperator::from_parts(self.grid.clone(), &self.kernel * c)
    }

    pub fn add(&self, other: &HilbertOperator) -> Result<HilbertOperator> {
        check_grid(&self.grid, &other.grid)?;
        Ok(HilbertOperator::from_parts(
            self.grid.clone(),
            &self.kernel + &other.kernel,
        ))
    }

    /// `(A + Aᵀ) / 2` on the kernel.
    pub fn symmetrized(&self) -> HilbertOperator {
        let k = (&self.kernel + self.kernel.transpose()) * 0.5;
        HilbertOperator::from_parts(self.grid.clone(), k)
    }

    /// Largest absolute entry of `K - Kᵀ`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.kernel.nrows();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                m = m.max((self.kernel[(i, j)] - self.kernel[(j, i)]).abs());
            }
        }
        m
    }

    /// Quadrature trace `Σ_i w_i K_ii`.
    pub fn trace(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.kernel[(i, i)])
            .sum()
    }

    /// Hilbert–Schmidt norm `(ΣΣ w_i w_j K_ij²)^{1/2}`.
    pub fn hs_norm(&self) -> f64 {
        let w = self.grid.weights();
        let n = w.len();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                let k = self.kernel[(i, j)];
                s += w[i] * w[j] * k * k;
            }
        }
        s.sqrt()
    }

    /// `W^{1/2} K W^{1/2}` after symmetrization.
    fn weighted_symmetric(&self) -> DMatrix<f64> {
        let sw: Vec<f64> = self.grid.weights().iter().map(|w| w.sqrt()).collect();
        let n = sw.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                let k = 0.5 * (self.kernel[(i, j)] + self.kernel[(j, i)]);
                m[(i, j)] = sw[i] * k * sw[j];
            }
        }
        m
    }
}

/// Tensor product `f ⊗ g`: the map `u ↦ ⟨f, u⟩ g`.
pub fn outer(f: &Curve, g: &Curve) -> Result<HilbertOperator> {
    check_grid(&f.grid, &g.grid)?;
    let n = f.grid.len();
    let kernel = DMatrix::from_fn(n, n, |i, j| g.values[i] * f.values[j]);
    Ok(HilbertOperator::from_parts(f.grid.clone(), kernel))
}

pub fn apply(a: &HilbertOperator, v: &Curve) -> Result<Curve> {
    check_grid(&a.grid, &v.grid)?;
    let wv = DVector::from_iterator(
        v.values.len(),
        v.values.iter().zip(a.grid.weights()).map(|(x, w)| x * w),
    );
    let out = &a.kernel * wv;
    Ok(Curve::from_parts(a.grid.clone(), out.as_slice().to_vec()))
}

/// Eigenpairs of a self-adjoint operator, sorted by decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Curve>,
}

/// Symmetric eigendecomposition. The operator is symmetrized first; ties in
/// the eigenvalues keep the solver's output order.
pub fn sym_eig(a: &HilbertOperator) -> Result<Eigen> {
    if a.kernel.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("operator kernel"));
    }
    let m = a.weighted_symmetric();
    let eig = SymmetricEigen::new(m);
    let order = descending_order(eig.eigenvalues.as_slice());
    let sw_inv: Vec<f64> = a.grid.weights().iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut values = Vec::with_capacity(order.len());
    let mut vectors = Vec::with_capacity(order.len());
    for &k in &order {
        values.push(eig.eigenvalues[k]);
        let col = eig.eigenvectors.column(k);
        let v: Vec<f64> = col.iter().zip(&sw_inv).map(|(q, s)| q * s).collect();
        vectors.push(Curve::from_parts(a.grid.clone(), v));
    }
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, decreasing. Cheaper than [`sym_eig`].
pub fn sym_eigenvalues(a: &HilbertOperator) -> Result<Vec<f64>> {
    if a.kernel.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("operator kernel"));
    }
    let m = a.weighted_symmetric();
    let ev = m.symmetric_eigenvalues();
    let order = descending_order(ev.as_slice());
    Ok(order.into_iter().map(|k| ev[k]).collect())
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Time-indexed collection of curves on one grid, stored column-wise
/// (`n × T`, one column per period).
#[derive(Debug, Clone)]
pub struct FunctionalSeries {
    grid: Arc<Grid>,
    data: DMatrix<f64>,
}

impl FunctionalSeries {
    pub fn new(grid: Arc<Grid>, data: DMatrix<f64>) -> Result<FunctionalSeries> {
        if data.nrows() != grid.len() {
            return Err(Error::LengthMismatch {
                what: "curve length",
                got: data.nrows(),
                expected: grid.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("functional series"));
        }
        Ok(FunctionalSeries { grid, data })
    }

    pub(crate) fn from_parts(grid: Arc<Grid>, data: DMatrix<f64>) -> FunctionalSeries {
        debug_assert_eq!(data.nrows(), grid.len());
        FunctionalSeries { grid, data }
    }

    pub fn from_curves(curves: &[Curve]) -> Result<FunctionalSeries> {
        let first = curves
            .first()
            .ok_or_else(|| Error::invalid("empty list of curves"))?;
        let grid = first.grid.clone();
        let n = grid.len();
        let mut data = DMatrix::zeros(n, curves.len());
        for (t, c) in curves.iter().enumerate() {
            check_grid(&grid, &c.grid)?;
            data.column_mut(t).copy_from_slice(&c.values);
        }
        Ok(FunctionalSeries { grid, data })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Number of periods `T`.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn values(&self, t: usize) -> &[f64] {
        let n = self.grid.len();
        &self.data.as_slice()[t * n..(t + 1) * n]
    }

    pub fn curve(&self, t: usize) -> Curve {
        Curve::from_parts(self.grid.clone(), self.values(t).to_vec())
    }

    pub fn curves(&self) -> Vec<Curve> {
        (0..self.len()).map(|t| self.curve(t)).collect()
    }

    /// Pointwise sample mean curve.
    pub fn mean(&self) -> Curve {
        let t = self.len() as f64;
        let m = self.data.column_sum() / t;
        Curve::from_parts(self.grid.clone(), m.as_slice().to_vec())
    }

    /// Series with the sample mean curve removed.
    pub fn demeaned(&self) -> FunctionalSeries {
        let m = self.data.column_mean();
        let mut d = self.data.clone();
        for mut col in d.column_iter_mut() {
            col -= &m;
        }
        FunctionalSeries::from_parts(self.grid.clone(), d)
    }

    /// `⟨X_t, θ⟩` for every period.
    pub fn inner_with(&self, theta: &Curve) -> Result<Vec<f64>> {
        check_grid(&self.grid, &theta.grid)?;
        let wt = DVector::from_iterator(
            theta.values.len(),
            theta.values.iter().zip(self.grid.weights()).map(|(a, w)| a * w),
        );
        Ok(self.data.tr_mul(&wt).as_slice().to_vec())
    }

    /// Multiplies each curve by the matching scalar.
    pub fn scale_by(&self, s: &[f64]) -> Result<FunctionalSeries> {
        if s.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "scalar multipliers",
                got: s.len(),
                expected: self.len(),
            });
        }
        let mut d = self.data.clone();
        for (mut col, &c) in d.column_iter_mut().zip(s) {
            col *= c;
        }
        Ok(FunctionalSeries::from_parts(self.grid.clone(), d))
    }

    /// Adds the same curve to every period.
    pub fn shifted(&self, c: &Curve) -> Result<FunctionalSeries> {
        check_grid(&self.grid, &c.grid)?;
        let v = DVector::from_column_slice(&c.values);
        let mut d = self.data.clone();
        for mut col in d.column_iter_mut() {
            col += &v;
        }
        Ok(FunctionalSeries::from_parts(self.grid.clone(), d))
    }

    /// Periods `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> FunctionalSeries {
        let d = self.data.columns(start, end - start).into_owned();
        FunctionalSeries::from_parts(self.grid.clone(), d)
    }
}

/// A real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    values: Vec<f64>,
}

impl ScalarSeries {
    pub fn new(values: Vec<f64>) -> Result<ScalarSeries> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar series"));
        }
        Ok(ScalarSeries { values })
    }

    pub(crate) fn from_parts(values: Vec<f64>) -> ScalarSeries {
        ScalarSeries { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn slice(&self, start: usize, end: usize) -> ScalarSeries {
        ScalarSeries::from_parts(self.values[start..end].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn fourier_inner_products() {
        let g = Grid::uniform(401);
        let f2 = fourier_basis(2, &g);
        let f3 = fourier_basis(3, &g);
        assert_abs_diff_eq!(inner_product(&f2, &f2).unwrap(), 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(inner_product(&f2, &f3).unwrap(), 0.0, epsilon = 1e-4);
        let two = Curve::constant(&g, 2.0);
        let three = Curve::constant(&g, 3.0);
        assert_abs_diff_eq!(inner_product(&two, &three).unwrap(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn fourier_gram_is_identity() {
        let g = Grid::uniform(401);
        let basis: Vec<Curve> = (1..=15).map(|j| fourier_basis(j, &g)).collect();
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(inner_product(a, b).unwrap(), expected, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn fourier_values() {
        let g = Grid::uniform(5);
        assert!(fourier_basis(1, &g).values().iter().all(|&v| v == 1.0));
        assert_abs_diff_eq!(fourier_value(2, 0.25), 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(fourier_value(3, 0.0), 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn norms() {
        let g = Grid::uniform(2001);
        assert_eq!(norm(&Curve::zeros(&g)), 0.0);
        assert_abs_diff_eq!(norm(&Curve::constant(&g, 1.0)), 1.0, epsilon = 1e-12);
        let s = Curve::from_fn(&g, |x| x);
        assert_abs_diff_eq!(norm(&s), 1.0 / 3f64.sqrt(), epsilon = 1e-3);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = Curve::constant(&Grid::uniform(11), 1.0);
        let b = Curve::constant(&Grid::uniform(12), 1.0);
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch)));
        assert!(matches!(outer(&a, &b), Err(Error::GridMismatch)));
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Grid::new(vec![0.1, 1.0]).is_err());
        let g = Grid::new(vec![0.0, 0.1, 0.7, 1.0]).unwrap();
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_and_scaling() {
        let g = Grid::uniform(101);
        let e = fourier_basis(2, &g);
        let p = outer(&e, &e).unwrap();
        let pe = apply(&p, &e).unwrap();
        for (a, b) in pe.values().iter().zip(e.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let f = fourier_basis(3, &g);
        let zero = apply(&outer(&f, &e).unwrap(), &e).unwrap();
        assert!(norm(&zero) < 1e-10);

        let one = fourier_basis(1, &g);
        assert_abs_diff_eq!(outer(&one, &one).unwrap().trace(), 1.0, epsilon = 1e-4);

        let two_e = apply(&p.scale(2.0), &e).unwrap();
        assert!(norm(&two_e.sub(&e.scale(2.0)).unwrap()) < 1e-10);

        let id = apply(&HilbertOperator::identity(&g), &f).unwrap();
        assert!(norm(&id.sub(&f).unwrap()) < 1e-12);
        assert!(norm(&apply(&HilbertOperator::zeros(&g), &f).unwrap()) == 0.0);
    }

    #[test]
    fn eigen_examples() {
        let g = Grid::uniform(101);
        let e1 = fourier_basis(2, &g);
        let e2 = fourier_basis(5, &g);
        let a = outer(&e1, &e1)
            .unwrap()
            .scale(2.0)
            .add(&outer(&e2, &e2).unwrap())
            .unwrap();
        let eig = sym_eig(&a).unwrap();
        assert_abs_diff_eq!(eig.values[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(eig.values[1], 1.0, epsilon = 1e-8);
        assert!(eig.values[2..].iter().all(|v| v.abs() < 1e-8));

        let z = sym_eig(&HilbertOperator::zeros(&g)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));

        let f = Curve::from_fn(&g, |x| x * x + 1.0);
        let f = f.scale(2.0 / norm(&f));
        let top = sym_eig(&outer(&f, &f).unwrap()).unwrap().values[0];
        assert_abs_diff_eq!(top, 4.0, epsilon = 1e-6);
    }

    #[test]
    fn eigen_rejects_non_finite() {
        let g = Grid::uniform(3);
        let mut k = DMatrix::zeros(3, 3);
        k[(0, 0)] = f64::NAN;
        let a = HilbertOperator::from_parts(g, k);
        assert!(sym_eig(&a).is_err());
    }

    fn curve_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, n)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inner_product_is_symmetric_and_bounded(a in curve_strategy(33), b in curve_strategy(33)) {
            let g = Grid::uniform(33);
            let f = Curve::new(g.clone(), a).unwrap();
            let h = Curve::new(g, b).unwrap();
            let fh = inner_product(&f, &h).unwrap();
            prop_assert!((fh - inner_product(&h, &f).unwrap()).abs() < 1e-12);
            prop_assert!(fh.abs() <= norm(&f) * norm(&h) + 1e-12);
        }

        #[test]
        fn outer_acts_as_rank_one_map(a in curve_strategy(21), b in curve_strategy(21), c in curve_strategy(21)) {
            let g = Grid::uniform(21);
            let f = Curve::new(g.clone(), a).unwrap();
            let h = Curve::new(g.clone(), b).unwrap();
            let u = Curve::new(g, c).unwrap();
            let lhs = apply(&outer(&f, &h).unwrap(), &u).unwrap();
            let rhs = h.scale(inner_product(&f, &u).unwrap());
            prop_assert!(norm(&lhs.sub(&rhs).unwrap()) <= 1e-10 * (1.0 + norm(&rhs)));
        }

        #[test]
        fn eigen_decomposition_reconstructs(a in curve_strategy(15), b in curve_strategy(15), c in curve_strategy(15)) {
            let g = Grid::uniform(15);
            let f = Curve::new(g.clone(), a).unwrap();
            let h = Curve::new(g.clone(), b).unwrap();
            let u = Curve::new(g.clone(), c).unwrap();
            let op = outer(&f, &f).unwrap()
                .add(&outer(&h, &h).unwrap().scale(0.5)).unwrap()
                .add(&outer(&u, &h).unwrap().symmetrized()).unwrap();
            let eig = sym_eig(&op).unwrap();
            prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
            let tr: f64 = eig.values.iter().sum();
            prop_assert!((tr - op.trace()).abs() <= 1e-8 * (1.0 + op.trace().abs()));
            for i in 0..eig.vectors.len() {
                for j in 0..eig.vectors.len() {
                    let ip = inner_product(&eig.vectors[i], &eig.vectors[j]).unwrap();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((ip - expected).abs() < 1e-8);
                }
            }
            let mut rebuilt = HilbertOperator::zeros(&g);
            for (l, v) in eig.values.iter().zip(&eig.vectors) {
                rebuilt = rebuilt.add(&outer(v, v).unwrap().scale(*l)).unwrap();
            }
            let diff = rebuilt.add(&op.scale(-1.0)).unwrap().hs_norm();
            prop_assert!(diff <= 1e-8 * (1.0 + op.hs_norm()));
        }
    }
}
