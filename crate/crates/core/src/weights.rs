//! Weighted functionals of the moment process.
//!
//! A [`WeightSpec`] pairs a nonnegative weight `w` with a measure `μ` on
//! `[0,1]` and defines `g_w(f) = C_w ∫ f(r) w(r) μ(dr)`. The normalizer
//!
//! ```text
//! C_w = ( ∫ ( ∫_s^1 w(r) μ(dr) )² μ(ds) )^{-1/2}
//! ```
//!
//! makes `g_w(B)` a standard normal for a scalar Brownian motion `B`, so every
//! admissible weight shares the same null critical value. Local power then
//! depends on the weight only through the drift factor
//! `D_w = C_w ∫ r w(r) μ(dr) ∈ (0, 1]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::Curve;
use crate::moment::MomentProcess;

/// Quadrature points for the continuous-measure constants.
pub const LEBESGUE_QUADRATURE_POINTS: usize = 20_001;

/// Integrating measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    /// Lebesgue measure on `[0,1]`. Applied to the step process it is
    /// realized exactly as the discrete measure on `{i/T}`.
    Lebesgue,
    /// `Σ_j (r_j − r_{j−1}) δ_{r_j}` for `0 = r_0 < r_1 < … < r_N = 1`.
    DiscretePartition(Vec<f64>),
    /// Point mass at `r = 1`.
    DiracAtOne,
}

/// Nonnegative weight function.
#[derive(Clone)]
pub enum WeightFn {
    /// `w(r) = r^p`.
    Power(f64),
    Constant(f64),
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl WeightFn {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            WeightFn::Power(p) => {
                if *p == 0.0 {
                    1.0
                } else {
                    r.powf(*p)
                }
            }
            WeightFn::Constant(c) => *c,
            WeightFn::Custom { f, .. } => f(r),
        }
    }

    fn scaled(&self, c: f64) -> WeightFn {
        match self {
            WeightFn::Constant(k) => WeightFn::Constant(c * k),
            other => {
                let inner = other.clone();
                WeightFn::Custom {
                    name: format!("{c}*{}", other.label()),
                    f: Arc::new(move |r| c * inner.eval(r)),
                }
            }
        }
    }

    fn label(&self) -> String {
        match self {
            WeightFn::Power(p) => format!("r^{p}"),
            WeightFn::Constant(c) => format!("{c}"),
            WeightFn::Custom { name, .. } => name.clone(),
        }
    }
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightFn({})", self.label())
    }
}

/// A validated weight/measure pair with its precomputed constants.
#[derive(Debug, Clone)]
pub struct WeightSpec {
    measure: Measure,
    weight: WeightFn,
    normalizer: f64,
    drift: f64,
}

impl WeightSpec {
    pub fn new(measure: Measure, weight: WeightFn) -> Result<WeightSpec> {
        if let Measure::DiscretePartition(points) = &measure {
            validate_partition(points)?;
        }
        let (outer, first_moment) = constants(&measure, &weight)?;
        if !(outer > 0.0) || !(first_moment > 0.0) {
            return Err(Error::invalid(
                "degenerate weight: ∫ r w(r) μ(dr) must be positive",
            ));
        }
        let normalizer = outer.powf(-0.5);
        Ok(WeightSpec {
            measure,
            weight,
            normalizer,
            drift: normalizer * first_moment,
        })
    }

    /// `w(r) = r^p` under Lebesgue measure.
    pub fn power(p: f64) -> Result<WeightSpec> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::invalid(format!("power weight needs finite p ≥ 0, got {p}")));
        }
        WeightSpec::new(Measure::Lebesgue, WeightFn::Power(p))
    }

    /// Endpoint evaluation `g(f) = f(1)`, the locally optimal choice.
    pub fn endpoint() -> WeightSpec {
        WeightSpec::new(Measure::DiracAtOne, WeightFn::Constant(1.0)).expect("endpoint weight")
    }

    /// Same measure, weight multiplied by `c > 0`.
    pub fn rescaled(&self, c: f64) -> Result<WeightSpec> {
        if !(c > 0.0) {
            return Err(Error::invalid("weight rescaling factor must be positive"));
        }
        WeightSpec::new(self.measure.clone(), self.weight.scaled(c))
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn weight(&self) -> &WeightFn {
        &self.weight
    }

    /// `C_w`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `D_w`.
    pub fn drift_factor(&self) -> f64 {
        self.drift
    }

    /// Short human-readable name, e.g. `p=7` or `endpoint`.
    pub fn label(&self) -> String {
        match (&self.measure, &self.weight) {
            (Measure::DiracAtOne, WeightFn::Constant(c)) if *c == 1.0 => "endpoint".into(),
            (Measure::DiracAtOne, w) => format!("endpoint[{}]", w.label()),
            (Measure::Lebesgue, WeightFn::Power(p)) => format!("p={p}"),
            (Measure::Lebesgue, w) => format!("lebesgue[{}]", w.label()),
            (Measure::DiscretePartition(pts), w) => {
                format!("partition{}[{}]", pts.len(), w.label())
            }
        }
    }

    /// `C_w` recomputed with Lebesgue measure replaced by the discrete measure
    /// on `{i/T}`. Equal to [`normalizer`](Self::normalizer) for the other
    /// measures. Not used by the tests, which follow the continuous constant.
    pub fn finite_sample_normalizer(&self, t_len: usize) -> Result<f64> {
        match &self.measure {
            Measure::Lebesgue => {
                let pts: Vec<f64> = (1..=t_len).map(|i| i as f64 / t_len as f64).collect();
                let (outer, _) = discrete_constants(&pts, &self.weight)?;
                Ok(outer.powf(-0.5))
            }
            _ => Ok(self.normalizer),
        }
    }

    /// Index/coefficient pairs `(i, c_i)` such that
    /// `g_w(S) = Σ c_i S(i/T)` for a process of sample size `T`.
    pub fn coefficients(&self, t_len: usize) -> Result<Vec<(usize, f64)>> {
        let c = self.normalizer;
        let tf = t_len as f64;
        match &self.measure {
            Measure::Lebesgue => Ok((1..=t_len)
                .map(|i| {
                    let r = i as f64 / tf;
                    (i, c * self.weight.eval(r) / tf)
                })
                .collect()),
            Measure::DiracAtOne => Ok(vec![(t_len, c * self.weight.eval(1.0))]),
            Measure::DiscretePartition(points) => {
                let mut out = Vec::with_capacity(points.len());
                let mut prev = 0.0;
                for &r in points {
                    let scaled = r * tf;
                    let i = scaled.round();
                    if (scaled - i).abs() > 1e-9 * tf.max(1.0) {
                        return Err(Error::invalid(format!(
                            "partition point {r} is not of the form i/{t_len}"
                        )));
                    }
                    out.push((i as usize, c * self.weight.eval(r) * (r - prev)));
                    prev = r;
                }
                Ok(out)
            }
        }
    }
}

fn validate_partition(points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::invalid("empty partition"));
    }
    let mut prev = 0.0;
    for &r in points {
        if !(r > prev) {
            return Err(Error::invalid("partition points must increase strictly from 0"));
        }
        prev = r;
    }
    if (prev - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("partition must end at 1"));
    }
    Ok(())
}

/// Returns `(∫(∫_s^1 w dμ)² dμ(s), ∫ r w(r) dμ(r))`.
fn constants(measure: &Measure, weight: &WeightFn) -> Result<(f64, f64)> {
    match measure {
        Measure::DiracAtOne => {
            let w1 = check_weight(weight.eval(1.0))?;
            Ok((w1 * w1, w1))
        }
        Measure::DiscretePartition(points) => discrete_constants(points, weight),
        Measure::Lebesgue => {
            let n = LEBESGUE_QUADRATURE_POINTS;
            let h = 1.0 / (n - 1) as f64;
            let mut w = Vec::with_capacity(n);
            for i in 0..n {
                w.push(check_weight(weight.eval(i as f64 * h))?);
            }
            // tail[i] = ∫_{s_i}^1 w(r) dr by cumulative trapezoid from the right
            let mut tail = vec![0.0; n];
            for i in (0..n - 1).rev() {
                tail[i] = tail[i + 1] + 0.5 * h * (w[i] + w[i + 1]);
            }
            let mut outer = 0.0;
            let mut first = 0.0;
            for i in 0..n {
                let q = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                outer += q * tail[i] * tail[i];
                first += q * (i as f64 * h) * w[i];
            }
            Ok((outer, first))
        }
    }
}

fn discrete_constants(points: &[f64], weight: &WeightFn) -> Result<(f64, f64)> {
    let mut masses = Vec::with_capacity(points.len());
    let mut prev = 0.0;
    for &r in points {
        masses.push(check_weight(weight.eval(r))? * (r - prev));
        prev = r;
    }
    let mut outer = 0.0;
    let mut tail = 0.0;
    let mut prev_points = points.iter().rev().skip(1).chain(std::iter::once(&0.0));
    for (&r, m) in points.iter().rev().zip(masses.iter().rev()) {
        tail += m;
        let below = *prev_points.next().unwrap();
        outer += (r - below) * tail * tail;
    }
    let first = points.iter().zip(&masses).map(|(r, m)| r * m).sum();
    Ok((outer, first))
}

fn check_weight(v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::NonFinite("weight function"));
    }
    if v < 0.0 {
        return Err(Error::invalid("weight function must be nonnegative"));
    }
    Ok(v)
}

/// `g_w(S)` as a curve.
pub fn apply_g(spec: &WeightSpec, process: &MomentProcess) -> Result<Curve> {
    let t_len = process.sample_size();
    let n = process.grid().len();
    let mut out = vec![0.0; n];
    for (i, c) in spec.coefficients(t_len)? {
        if i > t_len {
            return Err(Error::invalid("partition exceeds the process length"));
        }
        for (o, v) in out.iter_mut().zip(process.at(i)) {
            *o += c * v;
        }
    }
    Ok(Curve::from_parts(process.grid().clone(), out))
}

/// `‖√T g_w(S)‖²`.
pub fn statistic(spec: &WeightSpec, process: &MomentProcess) -> Result<f64> {
    let g = apply_g(spec, process)?;
    let t = process.sample_size() as f64;
    Ok(t * crate::hilbert::norm(&g).powi(2))
}

/// Closed form `D_w = √(2p+3)/√(2p+4)` for `w(r) = r^p` under Lebesgue measure.
pub fn power_drift_closed_form(p: f64) -> f64 {
    ((2.0 * p + 3.0) / (2.0 * p + 4.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{FunctionalSeries, Grid};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn endpoint_constants() {
        let e = WeightSpec::endpoint();
        assert_eq!(e.normalizer(), 1.0);
        assert_eq!(e.drift_factor(), 1.0);
        assert_eq!(e.label(), "endpoint");
    }

    #[test]
    fn lebesgue_constant_weight() {
        let w = WeightSpec::power(0.0).unwrap();
        assert!((w.normalizer() - 3f64.sqrt()).abs() < 1e-6);
        assert!((w.drift_factor() - 0.75f64.sqrt()).abs() < 1e-6);
        let c = WeightSpec::new(Measure::Lebesgue, WeightFn::Constant(7.0)).unwrap();
        assert!((c.normalizer() - w.normalizer() / 7.0).abs() < 1e-9);
    }

    #[test]
    fn power_drift_matches_closed_form() {
        for p in 0..=10 {
            let w = WeightSpec::power(p as f64).unwrap();
            assert!((w.drift_factor() - power_drift_closed_form(p as f64)).abs() < 1e-6);
        }
        assert_eq!(format!("{:.2}", power_drift_closed_form(5.0)), "0.96");
        assert_eq!(format!("{:.2}", power_drift_closed_form(7.0)), "0.97");
    }

    #[test]
    fn drift_increases_with_power_and_stays_below_one() {
        let ds: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 3.0, 7.0, 15.0, 40.0]
            .iter()
            .map(|&p| WeightSpec::power(p).unwrap().drift_factor())
            .collect();
        assert!(ds.windows(2).all(|w| w[1] > w[0]));
        assert!(ds.iter().all(|&d| d > 0.0 && d <= 1.0));
        let custom = WeightSpec::new(
            Measure::Lebesgue,
            WeightFn::Custom {
                name: "bump".into(),
                f: Arc::new(|r: f64| (-(r - 0.5f64).powi(2) * 20.0).exp()),
            },
        )
        .unwrap();
        assert!(custom.drift_factor() <= 1.0);
        let disc = WeightSpec::new(
            Measure::DiscretePartition(vec![0.25, 0.5, 0.75, 1.0]),
            WeightFn::Power(1.0),
        )
        .unwrap();
        assert!(disc.drift_factor() > 0.0 && disc.drift_factor() <= 1.0);
    }

    #[test]
    fn invalid_specs() {
        assert!(WeightSpec::power(-1.0).is_err());
        assert!(WeightSpec::new(Measure::Lebesgue, WeightFn::Constant(0.0)).is_err());
        assert!(WeightSpec::new(Measure::Lebesgue, WeightFn::Constant(-1.0)).is_err());
        assert!(WeightSpec::new(Measure::DiscretePartition(vec![0.5, 0.9]), WeightFn::Constant(1.0)).is_err());
    }

    fn random_process(t: usize, seed: u64) -> MomentProcess {
        let g = Grid::uniform(9);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = DMatrix::from_fn(g.len(), t, |_, _| rng.sample::<f64, _>(StandardNormal));
        MomentProcess::from_products(&FunctionalSeries::new(g, d).unwrap())
    }

    #[test]
    fn apply_g_cases() {
        let p = random_process(50, 1);
        let zero = MomentProcess::from_products(
            &FunctionalSeries::new(Grid::uniform(9), DMatrix::zeros(9, 50)).unwrap(),
        );
        assert!(apply_g(&WeightSpec::power(3.0).unwrap(), &zero)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(statistic(&WeightSpec::power(1.0).unwrap(), &zero).unwrap(), 0.0);

        let end = apply_g(&WeightSpec::endpoint(), &p).unwrap();
        assert_eq!(end.values(), p.at(50));
        let stat = statistic(&WeightSpec::endpoint(), &p).unwrap();
        let direct = 50.0 * crate::hilbert::norm(&p.endpoint()).powi(2);
        assert!((stat - direct).abs() < 1e-12 * direct.max(1.0));

        for spec in [WeightSpec::power(0.0).unwrap(), WeightSpec::power(7.0).unwrap(), WeightSpec::endpoint()] {
            let scaled = spec.rescaled(7.0).unwrap();
            let a = apply_g(&spec, &p).unwrap();
            let b = apply_g(&scaled, &p).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12);
            }
            let (s1, s2) = (statistic(&spec, &p).unwrap(), statistic(&scaled, &p).unwrap());
            assert!((s1 - s2).abs() <= 1e-12 * s1.max(1.0));
        }
    }

    #[test]
    fn partition_must_sit_on_sample_points() {
        let p = random_process(10, 2);
        let ok = WeightSpec::new(Measure::DiscretePartition(vec![0.5, 1.0]), WeightFn::Constant(1.0)).unwrap();
        assert!(apply_g(&ok, &p).is_ok());
        let bad = WeightSpec::new(Measure::DiscretePartition(vec![0.55, 1.0]), WeightFn::Constant(1.0)).unwrap();
        assert!(apply_g(&bad, &p).is_err());
    }

    #[test]
    fn discrete_constants_by_hand() {
        // partition {1/2, 1}, w ≡ 1: masses 1/2, 1/2; tails 1 (s=1/2) and 1/2 (s=1)
        // outer = 1/2·1² + 1/2·(1/2)² = 5/8, first = 1/2·1/2 + 1·1/2 = 3/4
        let s = WeightSpec::new(Measure::DiscretePartition(vec![0.5, 1.0]), WeightFn::Constant(1.0)).unwrap();
        assert!((s.normalizer() - (8.0f64 / 5.0).sqrt()).abs() < 1e-14);
        assert!((s.drift_factor() - 0.75 * (8.0f64 / 5.0).sqrt()).abs() < 1e-14);
        let fs = WeightSpec::power(0.0).unwrap().finite_sample_normalizer(2).unwrap();
        assert!((fs - s.normalizer()).abs() < 1e-14);
    }
}
