//! Constant-fraction growth optimisation on the capped simplex.
//!
//! For log utility the objective is the growth rate
//! `g(π) = <π, μ> - ½<π, Σπ> + Σ_i λ_i E[log(1 + π_i J_i)]`.
//! For CRRA utility with risk aversion `γ` the optimal constant fraction
//! maximises `<π, μ> - γ/2 <π, Σπ> + Σ_i λ_i E[((1 + π_i J_i)^{1-γ} - 1)/(1-γ)]`,
//! which reduces to `g` at `γ = 1`. Both are concave.

use super::UtilityError;
use crate::market::{JumpLaw, ModelSpec};
use crate::portfolio::SimplexVector;

const MAX_ITERATIONS: usize = 10_000;
const STATIONARITY: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthProblem {
    drift: Vec<f64>,
    covariance: Vec<f64>,
    intensity: Vec<f64>,
    law: Vec<JumpLaw>,
    risk_aversion: f64,
}

impl GrowthProblem {
    /// Diffusion-only problem; `covariance` is `d × d` row-major.
    pub fn new(drift: Vec<f64>, covariance: Vec<f64>) -> Result<Self, UtilityError> {
        let d = drift.len();
        if d == 0 || covariance.len() != d * d {
            return Err(UtilityError::InvalidCovariance(format!(
                "expected {d}x{d} entries, found {}",
                covariance.len()
            )));
        }
        if drift.iter().chain(&covariance).any(|v| !v.is_finite()) {
            return Err(UtilityError::InvalidProblem("non-finite parameter".into()));
        }
        check_psd(&covariance, d)?;
        Ok(Self {
            drift,
            covariance,
            intensity: vec![0.0; d],
            law: vec![JumpLaw::Fixed(0.0); d],
            risk_aversion: 1.0,
        })
    }

    /// Independent per-asset jumps.
    pub fn with_jumps(mut self, intensity: Vec<f64>, law: Vec<JumpLaw>) -> Result<Self, UtilityError> {
        let d = self.dim();
        if intensity.len() != d || law.len() != d {
            return Err(UtilityError::InvalidProblem(format!(
                "jump parameters must have dimension {d}"
            )));
        }
        if intensity.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(UtilityError::InvalidProblem("intensities must be nonnegative".into()));
        }
        for l in &law {
            l.validate()
                .map_err(|e| UtilityError::InvalidProblem(e.to_string()))?;
        }
        self.intensity = intensity;
        self.law = law;
        Ok(self)
    }

    /// Risk aversion `γ > 0`; 1 is log utility.
    pub fn with_risk_aversion(mut self, gamma: f64) -> Result<Self, UtilityError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(UtilityError::InvalidProblem(format!(
                "risk aversion must be positive, got {gamma}"
            )));
        }
        self.risk_aversion = gamma;
        Ok(self)
    }

    pub fn from_model(model: &ModelSpec) -> Result<Self, UtilityError> {
        let diffusion = model.diffusion().ok_or_else(|| {
            UtilityError::InvalidProblem("fixture markets have no growth problem".into())
        })?;
        let problem = Self::new(diffusion.drift.clone(), diffusion.covariance())?;
        match model.jumps() {
            Some(j) => problem.with_jumps(j.intensity.clone(), j.law.clone()),
            None => Ok(problem),
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn risk_aversion(&self) -> f64 {
        self.risk_aversion
    }

    pub fn has_jumps(&self) -> bool {
        self.intensity.iter().any(|&l| l > 0.0)
    }

    fn quadratic(&self, pi: &[f64], i: usize) -> f64 {
        let d = self.dim();
        (0..d).map(|j| self.covariance[i * d + j] * pi[j]).sum()
    }

    /// Objective value; `-∞` where some jump would wipe out the portfolio.
    pub fn objective(&self, pi: &[f64]) -> f64 {
        let gamma = self.risk_aversion;
        let mut value = 0.0;
        for i in 0..self.dim() {
            value += pi[i] * self.drift[i] - 0.5 * gamma * pi[i] * self.quadratic(pi, i);
            if self.intensity[i] > 0.0 && pi[i] != 0.0 {
                let p = pi[i];
                let e = self.law[i].expectation(|j| {
                    let f = 1.0 + p * j;
                    if f <= 0.0 {
                        f64::NEG_INFINITY
                    } else if gamma == 1.0 {
                        f.ln()
                    } else {
                        (f.powf(1.0 - gamma) - 1.0) / (1.0 - gamma)
                    }
                });
                value += self.intensity[i] * e;
            }
        }
        value
    }

    pub fn gradient(&self, pi: &[f64], out: &mut [f64]) {
        let gamma = self.risk_aversion;
        for i in 0..self.dim() {
            out[i] = self.drift[i] - gamma * self.quadratic(pi, i);
            if self.intensity[i] > 0.0 {
                let p = pi[i];
                out[i] += self.intensity[i]
                    * self.law[i].expectation(|j| j * (1.0 + p * j).powf(-gamma));
            }
        }
    }
}

fn check_psd(cov: &[f64], d: usize) -> Result<(), UtilityError> {
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (cov[i * d + j], cov[j * d + i]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(UtilityError::InvalidCovariance("matrix is not symmetric".into()));
            }
        }
    }
    // Cholesky with a small relative tolerance on pivots.
    let scale = (0..d).map(|i| cov[i * d + i]).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale;
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let pivot = cov[i * d + i] - s;
                if pivot < -tol {
                    return Err(UtilityError::InvalidCovariance(
                        "matrix is not positive semidefinite".into(),
                    ));
                }
                l[i * d + i] = pivot.max(0.0).sqrt();
            } else if l[j * d + j] > 0.0 {
                l[i * d + j] = (cov[i * d + j] - s) / l[j * d + j];
            } else if (cov[i * d + j] - s).abs() > tol {
                return Err(UtilityError::InvalidCovariance(
                    "matrix is not positive semidefinite".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Euclidean projection onto `{z >= 0, Σz <= 1}`.
pub fn project_capped_simplex(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        return clipped;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    let mut z: Vec<f64> = v.iter().map(|x| (x - theta).max(0.0)).collect();
    // Guard against the sum creeping above 1 by rounding.
    let total: f64 = z.iter().sum();
    if total > 1.0 {
        for x in &mut z {
            *x /= total;
        }
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub fractions: SimplexVector,
    pub value: f64,
    pub iterations: usize,
    /// Projected-gradient norm at exit.
    pub stationarity: f64,
    pub converged: bool,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Projected gradient ascent with Armijo backtracking, started at `π = 0`.
pub fn optimize_constant_fraction(problem: &GrowthProblem) -> Result<OptimizerResult, UtilityError> {
    let d = problem.dim();
    let mut pi = vec![0.0; d];
    let mut value = problem.objective(&pi);
    let mut grad = vec![0.0; d];
    let mut step: f64 = 1.0;
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        problem.gradient(&pi, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(UtilityError::NonConcave(format!(
                "non-finite gradient at {pi:?}"
            )));
        }
        let target: Vec<f64> = pi.iter().zip(&grad).map(|(p, g)| p + g).collect();
        stationarity = distance(&project_capped_simplex(&target), &pi);
        if stationarity < STATIONARITY {
            break;
        }
        iterations += 1;
        step = (2.0 * step).min(MAX_STEP);
        let mut trial_grad = vec![0.0; d];
        loop {
            let trial: Vec<f64> = pi.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
            let candidate = project_capped_simplex(&trial);
            let ascent: f64 = grad.iter().zip(candidate.iter().zip(&pi)).map(|(g, (c, p))| g * (c - p)).sum();
            let trial_value = problem.objective(&candidate);
            // Near the optimum objective differences drown in rounding; by
            // concavity `<∇g(candidate), candidate - π> >= 0` also certifies
            // `g(candidate) >= g(π)` and is computed to full precision.
            let accept = trial_value.is_finite()
                && (trial_value >= value + ARMIJO * ascent || {
                    problem.gradient(&candidate, &mut trial_grad);
                    let slope: f64 = trial_grad.iter().zip(candidate.iter().zip(&pi)).map(|(g, (c, p))| g * (c - p)).sum();
                    slope >= 0.0 && ascent > 0.0
                });
            if accept {
                pi = candidate;
                value = trial_value;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Err(UtilityError::NonConcave(format!(
                    "line search failed at {pi:?} (objective {value})"
                )));
            }
        }
    }
    let fractions = SimplexVector::new(pi)
        .map_err(|e| UtilityError::InvalidProblem(e.to_string()))?;
    Ok(OptimizerResult {
        fractions,
        value,
        iterations,
        stationarity,
        converged: stationarity < STATIONARITY,
    })
}

/// Largest excess `g(π) - g(π*)` over the lattice `{mesh · j} ∩ simplex`.
///
/// A value `<= 1e-8` certifies `π*` on the lattice.
pub fn lattice_certificate(
    problem: &GrowthProblem,
    optimum: &SimplexVector,
    mesh: f64,
) -> Result<f64, UtilityError> {
    let d = problem.dim();
    if d > 3 {
        return Err(UtilityError::InvalidProblem(format!(
            "lattice certificate supports d <= 3, got {d}"
        )));
    }
    let steps = (1.0 / mesh).round() as usize;
    if steps == 0 {
        return Err(UtilityError::InvalidProblem(format!("invalid lattice mesh {mesh}")));
    }
    let best = problem.objective(optimum.as_slice());
    let mut worst = f64::NEG_INFINITY;
    let mut point = vec![0usize; d];
    loop {
        if point.iter().sum::<usize>() <= steps {
            let pi: Vec<f64> = point.iter().map(|&j| j as f64 / steps as f64).collect();
            worst = worst.max(problem.objective(&pi) - best);
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == d {
                return Ok(worst);
            }
            point[i] += 1;
            if point[i] <= steps {
                break;
            }
            point[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(mu: f64, var: f64) -> GrowthProblem {
        GrowthProblem::new(vec![mu], vec![var]).unwrap()
    }

    #[test]
    fn boundary_optimum() {
        let r = optimize_constant_fraction(&one_d(0.08, 0.04)).unwrap();
        assert_eq!(r.fractions.as_slice(), &[1.0]);
        assert!((r.value - 0.06).abs() < 1e-15);
    }

    #[test]
    fn interior_optimum() {
        let r = optimize_constant_fraction(&one_d(0.02, 0.04)).unwrap();
        assert!((r.fractions[0] - 0.5).abs() < 1e-6);
        assert!((r.value - 0.005).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn no_investment_without_premium() {
        let r = optimize_constant_fraction(&one_d(-0.01, 0.04)).unwrap();
        assert_eq!(r.fractions.as_slice(), &[0.0]);
        let r = optimize_constant_fraction(&GrowthProblem::new(vec![0.0, -0.1], vec![0.04, 0.0, 0.0, 0.09]).unwrap()).unwrap();
        assert_eq!(r.fractions.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn projection_cases() {
        assert_eq!(project_capped_simplex(&[0.2, -0.5]), vec![0.2, 0.0]);
        assert_eq!(project_capped_simplex(&[1.5]), vec![1.0]);
        let z = project_capped_simplex(&[0.9, 0.7]);
        assert!((z[0] - 0.6).abs() < 1e-15 && (z[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn jumps_pull_the_optimum_down() {
        let plain = optimize_constant_fraction(&one_d(0.12, 0.04)).unwrap();
        let jumpy = one_d(0.12, 0.04)
            .with_jumps(vec![1.0], vec![JumpLaw::TwoPoint { low: -0.4, high: 0.25, p_low: 0.5 }])
            .unwrap();
        let r = optimize_constant_fraction(&jumpy).unwrap();
        assert!(r.fractions[0] < plain.fractions[0]);
        assert!(lattice_certificate(&jumpy, &r.fractions, 0.01).unwrap() <= 1e-8);
    }

    #[test]
    fn total_loss_jump_is_avoided() {
        let p = one_d(0.3, 0.04).with_jumps(vec![0.5], vec![JumpLaw::Fixed(-1.0)]).unwrap();
        let r = optimize_constant_fraction(&p).unwrap();
        assert!(r.fractions[0] < 1.0 && r.value.is_finite());
    }

    #[test]
    fn crra_shrinks_the_merton_fraction() {
        // π* = μ / (γ σ²) = 0.08 / (2 · 0.04) = 1 → capped; use μ = 0.04.
        let p = one_d(0.04, 0.04).with_risk_aversion(2.0).unwrap();
        let r = optimize_constant_fraction(&p).unwrap();
        assert!((r.fractions[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn invalid_covariance() {
        assert!(GrowthProblem::new(vec![0.1, 0.1], vec![0.04, 0.1, 0.1, 0.04]).is_err());
        assert!(GrowthProblem::new(vec![0.1, 0.1], vec![0.04, 0.01, 0.0, 0.04]).is_err());
        assert!(GrowthProblem::new(vec![0.1], vec![-0.04]).is_err());
    }
}
