use super::ConvergenceError;
use crate::portfolio::WealthPaths;
use crate::stats::{pairwise_sum, wilson_interval};

/// `max_k |a_k - b_k|`.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Per-path supremum distance between two wealth ensembles on one grid.
pub fn ucp_distance(x: &WealthPaths, y: &WealthPaths) -> Result<Vec<f64>, ConvergenceError> {
    if x.grid() != y.grid() || x.n_paths() != y.n_paths() {
        return Err(ConvergenceError::GridMismatch);
    }
    Ok((0..x.n_paths()).map(|p| sup_distance(x.path(p), y.path(p))).collect())
}

/// Monte Carlo estimate of `P[distance > eps]` with a Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exceedance {
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Effective sample size behind the interval.
    pub n: f64,
}

pub fn estimate_exceedance(distances: &[f64], eps: f64) -> Result<Exceedance, ConvergenceError> {
    if distances.is_empty() {
        return Err(ConvergenceError::EmptyEnsemble);
    }
    if !(eps > 0.0) {
        return Err(ConvergenceError::InvalidThreshold(eps));
    }
    let hits = distances.iter().filter(|&&d| d > eps).count();
    let n = distances.len() as f64;
    let p_hat = hits as f64 / n;
    let (ci_lo, ci_hi) = wilson_interval(p_hat, n);
    Ok(Exceedance { p_hat, ci_lo, ci_hi, n })
}

/// Weighted exceedance `sum_p w_p 1{d_p > eps}` with normalised weights.
///
/// The interval uses the Kish effective sample size `(sum w)^2 / sum w^2`.
pub fn estimate_weighted_exceedance(
    distances: &[f64],
    weights: &[f64],
    eps: f64,
) -> Result<Exceedance, ConvergenceError> {
    if distances.is_empty() {
        return Err(ConvergenceError::EmptyEnsemble);
    }
    if distances.len() != weights.len() {
        return Err(ConvergenceError::GridMismatch);
    }
    if !(eps > 0.0) {
        return Err(ConvergenceError::InvalidThreshold(eps));
    }
    if weights.iter().all(|&w| w == weights[0]) && weights[0] > 0.0 {
        return estimate_exceedance(distances, eps);
    }
    let total = pairwise_sum(weights);
    let squares: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let hits: Vec<f64> = distances
        .iter()
        .zip(weights)
        .map(|(&d, &w)| if d > eps { w } else { 0.0 })
        .collect();
    let p_hat = (pairwise_sum(&hits) / total).clamp(0.0, 1.0);
    let n = total * total / pairwise_sum(&squares);
    let (ci_lo, ci_hi) = wilson_interval(p_hat, n);
    Ok(Exceedance { p_hat, ci_lo, ci_hi, n })
}

/// First level whose estimate rises above its predecessor with
/// non-overlapping intervals, i.e. a break of "non-increasing up to CI
/// overlap".
pub fn monotonicity_break(levels: &[Exceedance]) -> Option<usize> {
    levels
        .windows(2)
        .position(|w| w[1].p_hat > w[0].p_hat && w[1].ci_lo > w[0].ci_hi)
        .map(|i| i + 1)
}
