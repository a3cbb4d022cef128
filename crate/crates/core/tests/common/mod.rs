//! Helpers shared by the integration test targets.
#![allow(dead_code)]

/// Upper tail `P(Σ λ_j χ²₁ > x)` by numerical inversion of the characteristic
/// function. Needs at least two positive weights for the tail bound to be
/// usable.
pub fn imhof_tail(lambdas: &[f64], x: f64) -> f64 {
    let d = lambdas.len() as f64;
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.5 * lambdas.iter().sum::<f64>() - 0.5 * x;
        }
        let theta = 0.5 * lambdas.iter().map(|l| (l * u).atan()).sum::<f64>() - 0.5 * x * u;
        let rho: f64 = lambdas.iter().map(|l| (1.0 + l * l * u * u).powf(0.25)).product();
        theta.sin() / (u * rho)
    };
    // |integrand| ≤ u^{-1-d/2} / Π√λ, so the tail beyond `upper` is below `tol`
    let tol = 1e-5;
    let root_prod: f64 = lambdas.iter().map(|l| l.sqrt()).product();
    let upper = ((2.0 / d) / (tol * root_prod)).powf(2.0 / d).clamp(50.0, 2e5);
    let step = (0.4 / (0.5 * x + lambdas.iter().sum::<f64>())).min(0.1);
    let n = ((upper / step).ceil() as usize + 1) & !1;
    let h = upper / n as f64;
    let mut total = integrand(0.0) + integrand(upper);
    for i in 1..n {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += c * integrand(i as f64 * h);
    }
    0.5 + total * h / 3.0 / std::f64::consts::PI
}

/// `(1−α)`-quantile by bisection on [`imhof_tail`] inside `[lo, hi]`.
pub fn imhof_quantile(lambdas: &[f64], alpha: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..25 {
        let mid = 0.5 * (lo + hi);
        if imhof_tail(lambdas, mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
