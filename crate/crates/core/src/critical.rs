//! Monte Carlo calibration of weighted chi-square limits.
//!
//! Under the null the statistic converges to `Σ_j λ_j ν_j²` with i.i.d.
//! standard normal `ν_j`; under local alternatives each term picks up a shift,
//! `Σ_j (√λ_j ν_j + δ_j)²`. Both are simulated here from explicit seeds.
//!
//! Draws are produced in fixed-size blocks, each with its own derived stream,
//! so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{check_grid, inner_product, norm, Curve};

/// Eigenvalues at or below this are treated as zero.
pub const DEGENERATE_TOLERANCE: f64 = 1e-14;

const BLOCK: usize = 8192;

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for stream `index` of `base`.
pub fn stream(base: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, index))
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("eigenvalues"));
    }
    if lambdas.iter().any(|&l| l < 0.0) {
        return Err(Error::invalid("eigenvalues must be nonnegative"));
    }
    Ok(())
}

fn check_nondegenerate(lambdas: &[f64]) -> Result<()> {
    check_lambdas(lambdas)?;
    if lambdas.iter().all(|&l| l <= DEGENERATE_TOLERANCE) {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(())
}

fn check_draws(draws: usize) -> Result<()> {
    if draws == 0 {
        return Err(Error::invalid("number of Monte Carlo draws must be positive"));
    }
    Ok(())
}

/// `draws` realizations of `Σ (√λ_j ν_j + δ_j)² + residual`.
fn simulate(lambdas: &[f64], shifts: &[f64], residual: f64, draws: usize, seed: u64) -> Vec<f64> {
    let roots: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let n_blocks = draws.div_ceil(BLOCK);
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b as u64);
            let len = BLOCK.min(draws - b * BLOCK);
            (0..len)
                .map(|_| {
                    let mut acc = residual;
                    for (r, d) in roots.iter().zip(shifts) {
                        let nu: f64 = rng.sample(StandardNormal);
                        let x = r * nu + d;
                        acc += x * x;
                    }
                    acc
                })
                .collect()
        })
        .collect();
    blocks.concat()
}

/// Null draws of `Σ λ_j ν_j²`.
pub fn weighted_chisq_draws(lambdas: &[f64], draws: usize, seed: u64) -> Result<Vec<f64>> {
    check_lambdas(lambdas)?;
    check_draws(draws)?;
    Ok(simulate(lambdas, &vec![0.0; lambdas.len()], 0.0, draws, seed))
}

/// `⌈(1−α)n⌉`-th order statistic of `sample` (reorders it).
pub fn empirical_quantile(sample: &mut [f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if sample.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let n = sample.len();
    let k = (((1.0 - alpha) * n as f64).ceil() as usize).clamp(1, n);
    let (_, q, _) = sample.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*q)
}

/// [`empirical_quantile`] for an already ascending sample.
pub fn sorted_quantile(sorted: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if sorted.is_empty() {
        return Err(Error::invalid("empty sample"));
    }
    let n = sorted.len();
    let k = (((1.0 - alpha) * n as f64).ceil() as usize).clamp(1, n);
    Ok(sorted[k - 1])
}

/// [`exceedance_pvalue`] for an already ascending sample.
pub fn sorted_pvalue(sorted: &[f64], stat: f64) -> f64 {
    let r = sorted.len() - sorted.partition_point(|&d| d <= stat);
    (r + 1) as f64 / (sorted.len() + 1) as f64
}

/// `(#{draws > stat} + 1) / (n + 1)`.
pub fn exceedance_pvalue(sample: &[f64], stat: f64) -> f64 {
    let r = sample.iter().filter(|&&d| d > stat).count();
    (r + 1) as f64 / (sample.len() + 1) as f64
}

/// Monte Carlo `(1−α)`-quantile of `Σ λ_j ν_j²`.
pub fn mc_quantile(lambdas: &[f64], alpha: f64, draws: usize, seed: u64) -> Result<f64> {
    check_nondegenerate(lambdas)?;
    let mut sample = weighted_chisq_draws(lambdas, draws, seed)?;
    empirical_quantile(&mut sample, alpha)
}

/// Monte Carlo p-value of `stat` under `Σ λ_j ν_j²`.
pub fn mc_pvalue(lambdas: &[f64], stat: f64, draws: usize, seed: u64) -> Result<f64> {
    check_nondegenerate(lambdas)?;
    let sample = weighted_chisq_draws(lambdas, draws, seed)?;
    Ok(exceedance_pvalue(&sample, stat))
}

/// Critical value and p-value from one shared set of draws.
pub fn calibrate(lambdas: &[f64], stat: f64, alpha: f64, draws: usize, seed: u64) -> Result<(f64, f64)> {
    check_nondegenerate(lambdas)?;
    let mut sample = weighted_chisq_draws(lambdas, draws, seed)?;
    let p = exceedance_pvalue(&sample, stat);
    let q = empirical_quantile(&mut sample, alpha)?;
    Ok((q, p))
}

/// Draws of the local limit `Σ_j (√λ_j ν_j + ⟨shift, v_j⟩)²`.
///
/// The part of `shift` outside the span of `eigvecs` adds its squared norm to
/// every draw, so the result is `‖G + shift‖²` for a Gaussian `G` supported on
/// that span.
pub fn local_limit_draws(
    lambdas: &[f64],
    eigvecs: &[Curve],
    shift: &Curve,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_lambdas(lambdas)?;
    check_draws(draws)?;
    if eigvecs.len() != lambdas.len() {
        return Err(Error::LengthMismatch {
            what: "eigenvectors",
            got: eigvecs.len(),
            expected: lambdas.len(),
        });
    }
    let mut shifts = Vec::with_capacity(eigvecs.len());
    let mut residual = shift.clone();
    for v in eigvecs {
        check_grid(shift.grid(), v.grid())?;
        let nv = norm(v);
        if nv == 0.0 {
            shifts.push(0.0);
            continue;
        }
        let d = inner_product(shift, v)?;
        shifts.push(d);
        residual = residual.axpy(-d / (nv * nv), v)?;
    }
    let mut extra = norm(&residual).powi(2);
    if extra <= 1e-24 * norm(shift).powi(2).max(f64::MIN_POSITIVE) {
        extra = 0.0;
    }
    Ok(simulate(lambdas, &shifts, extra, draws, seed))
}

/// `P(Σ (√λ_j ν_j + δ_j)² > q_α)` with `q_α` from [`mc_quantile`]. The same
/// seed drives both simulations, so a zero shift reproduces the null draws.
pub fn local_power(
    lambdas: &[f64],
    eigvecs: &[Curve],
    shift: &Curve,
    alpha: f64,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let q = mc_quantile(lambdas, alpha, draws, seed)?;
    let sample = local_limit_draws(lambdas, eigvecs, shift, draws, seed)?;
    Ok(sample.iter().filter(|&&d| d > q).count() as f64 / draws as f64)
}
