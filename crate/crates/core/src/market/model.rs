use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::fixture::PriceTable;
use super::{MarketError, TimeGrid};
use crate::quadrature;

/// Largest admissible per-step jump probability `lambda * dt`.
pub const MAX_STEP_JUMP_PROBABILITY: f64 = 0.1;

/// Number of standard deviations covered by the log-normal quadrature.
const LOGNORMAL_SPAN: f64 = 10.0;

/// Law of the return increment `ΔR` at a jump. Support is always in `[-1, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    /// Deterministic jump size.
    Fixed(f64),
    /// `low` with probability `p_low`, otherwise `high`.
    TwoPoint { low: f64, high: f64, p_low: f64 },
    /// `e^Z - 1` with `Z ~ N(mean, std_dev^2)`.
    ShiftedLogNormal { mean: f64, std_dev: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<(), MarketError> {
        match *self {
            JumpLaw::Fixed(size) => check_jump_size(size),
            JumpLaw::TwoPoint { low, high, p_low } => {
                check_jump_size(low)?;
                check_jump_size(high)?;
                if !(0.0..=1.0).contains(&p_low) {
                    return Err(MarketError::InvalidModel(format!(
                        "two-point jump probability must lie in [0, 1], got {p_low}"
                    )));
                }
                Ok(())
            }
            JumpLaw::ShiftedLogNormal { mean, std_dev } => {
                if !mean.is_finite() || !(std_dev.is_finite() && std_dev >= 0.0) {
                    return Err(MarketError::InvalidModel(format!(
                        "log-normal jump parameters must be finite with std_dev >= 0, got ({mean}, {std_dev})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::Fixed(size) => size,
            JumpLaw::TwoPoint { low, high, p_low } => {
                if rng.random::<f64>() < p_low {
                    low
                } else {
                    high
                }
            }
            JumpLaw::ShiftedLogNormal { mean, std_dev } => {
                let z: f64 = StandardNormal.sample(rng);
                (mean + std_dev * z).exp_m1()
            }
        }
    }

    /// `E[f(J)]`: exact for discrete laws, 64-point Gauss-Legendre otherwise.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match *self {
            JumpLaw::Fixed(size) => f(size),
            JumpLaw::TwoPoint { low, high, p_low } => {
                let mut total = 0.0;
                if p_low > 0.0 {
                    total += p_low * f(low);
                }
                if p_low < 1.0 {
                    total += (1.0 - p_low) * f(high);
                }
                total
            }
            JumpLaw::ShiftedLogNormal { mean, std_dev } => {
                if std_dev == 0.0 {
                    return f(mean.exp_m1());
                }
                let rule = quadrature::gauss_legendre(64);
                let c = 1.0 / (2.0 * PI).sqrt();
                quadrature::integrate(&rule, -LOGNORMAL_SPAN, LOGNORMAL_SPAN, |z| {
                    c * (-0.5 * z * z).exp() * f((mean + std_dev * z).exp_m1())
                })
            }
        }
    }

    /// Smallest point of the support (infimum for the log-normal law).
    pub fn min_size(&self) -> f64 {
        match *self {
            JumpLaw::Fixed(size) => size,
            JumpLaw::TwoPoint { low, high, p_low } => {
                if p_low == 0.0 {
                    high
                } else if p_low == 1.0 {
                    low
                } else {
                    low.min(high)
                }
            }
            JumpLaw::ShiftedLogNormal { .. } => -1.0,
        }
    }
}

fn check_jump_size(size: f64) -> Result<(), MarketError> {
    if !size.is_finite() || size < -1.0 {
        return Err(MarketError::JumpBelowMinusOne(size));
    }
    Ok(())
}

/// Drift, volatility and correlation of the log-normal diffusion part.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffusion {
    /// Drift `mu^i` per year.
    pub drift: Vec<f64>,
    /// Volatility `sigma^i` per square-root year.
    pub volatility: Vec<f64>,
    /// Row-major `d x d` correlation matrix. Empty means identity.
    pub correlation: Vec<f64>,
    /// Initial prices `S^i_0 > 0`.
    pub initial: Vec<f64>,
}

impl Diffusion {
    pub fn new(drift: Vec<f64>, volatility: Vec<f64>, initial: Vec<f64>) -> Self {
        Self {
            drift,
            volatility,
            correlation: Vec::new(),
            initial,
        }
    }

    pub fn with_correlation(mut self, correlation: Vec<f64>) -> Self {
        self.correlation = correlation;
        self
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    /// Correlation matrix, expanding the empty shorthand to the identity.
    pub fn correlation_matrix(&self) -> Vec<f64> {
        let d = self.dim();
        if self.correlation.is_empty() {
            let mut id = vec![0.0; d * d];
            for i in 0..d {
                id[i * d + i] = 1.0;
            }
            id
        } else {
            self.correlation.clone()
        }
    }

    /// Covariance `Sigma_ij = rho_ij sigma_i sigma_j`, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let rho = self.correlation_matrix();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = rho[i * d + j] * self.volatility[i] * self.volatility[j];
            }
        }
        cov
    }

    fn validate(&self) -> Result<(), MarketError> {
        let d = self.dim();
        if d == 0 {
            return Err(MarketError::InvalidModel("model has no assets".into()));
        }
        if self.volatility.len() != d || self.initial.len() != d {
            return Err(MarketError::DimensionMismatch {
                expected: d,
                found: self.volatility.len().min(self.initial.len()),
            });
        }
        if let Some(mu) = self.drift.iter().find(|m| !m.is_finite()) {
            return Err(MarketError::InvalidModel(format!("drift must be finite, got {mu}")));
        }
        if let Some(s) = self.volatility.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(MarketError::InvalidModel(format!(
                "volatility must be finite and >= 0, got {s}"
            )));
        }
        if let Some(s0) = self.initial.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(MarketError::InvalidModel(format!(
                "initial price must be positive, got {s0}"
            )));
        }
        if !self.correlation.is_empty() && self.correlation.len() != d * d {
            return Err(MarketError::InvalidCorrelation(format!(
                "expected {} entries, found {}",
                d * d,
                self.correlation.len()
            )));
        }
        Ok(())
    }
}

/// Independent per-asset jump components.
#[derive(Debug, Clone, PartialEq)]
pub struct Jumps {
    /// Intensity `lambda^i` per year.
    pub intensity: Vec<f64>,
    /// Jump-size law per asset.
    pub law: Vec<JumpLaw>,
}

impl Jumps {
    /// Same intensity and law for every one of `d` assets.
    pub fn uniform(d: usize, intensity: f64, law: JumpLaw) -> Self {
        Self {
            intensity: vec![intensity; d],
            law: vec![law; d],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    BlackScholes(Diffusion),
    MertonJumpDiffusion { diffusion: Diffusion, jumps: Jumps },
    Fixture(PriceTable),
}

impl ModelSpec {
    pub fn black_scholes_1d(drift: f64, volatility: f64, initial: f64) -> Self {
        ModelSpec::BlackScholes(Diffusion::new(vec![drift], vec![volatility], vec![initial]))
    }

    pub fn merton_1d(drift: f64, volatility: f64, initial: f64, intensity: f64, law: JumpLaw) -> Self {
        ModelSpec::MertonJumpDiffusion {
            diffusion: Diffusion::new(vec![drift], vec![volatility], vec![initial]),
            jumps: Jumps::uniform(1, intensity, law),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelSpec::BlackScholes(diffusion) => diffusion.dim(),
            ModelSpec::MertonJumpDiffusion { diffusion, .. } => diffusion.dim(),
            ModelSpec::Fixture(table) => table.dim(),
        }
    }

    pub fn diffusion(&self) -> Option<&Diffusion> {
        match self {
            ModelSpec::BlackScholes(diffusion) => Some(diffusion),
            ModelSpec::MertonJumpDiffusion { diffusion, .. } => Some(diffusion),
            ModelSpec::Fixture(_) => None,
        }
    }

    pub fn jumps(&self) -> Option<&Jumps> {
        match self {
            ModelSpec::MertonJumpDiffusion { jumps, .. } => Some(jumps),
            _ => None,
        }
    }

    /// Checks the model against a grid and returns the correlation factor.
    pub fn validate(&self, grid: &TimeGrid) -> Result<Vec<f64>, MarketError> {
        match self {
            ModelSpec::BlackScholes(diffusion) => {
                diffusion.validate()?;
                factor_correlation(&diffusion.correlation_matrix(), diffusion.dim())
            }
            ModelSpec::MertonJumpDiffusion { diffusion, jumps } => {
                diffusion.validate()?;
                let d = diffusion.dim();
                if jumps.intensity.len() != d || jumps.law.len() != d {
                    return Err(MarketError::DimensionMismatch {
                        expected: d,
                        found: jumps.intensity.len().min(jumps.law.len()),
                    });
                }
                for (&lambda, law) in jumps.intensity.iter().zip(&jumps.law) {
                    if !(lambda.is_finite() && lambda >= 0.0) {
                        return Err(MarketError::InvalidModel(format!(
                            "jump intensity must be finite and >= 0, got {lambda}"
                        )));
                    }
                    law.validate()?;
                    let p = lambda * grid.dt();
                    if p >= MAX_STEP_JUMP_PROBABILITY {
                        return Err(MarketError::JumpResolution {
                            probability: p,
                            limit: MAX_STEP_JUMP_PROBABILITY,
                        });
                    }
                }
                factor_correlation(&diffusion.correlation_matrix(), d)
            }
            ModelSpec::Fixture(table) => {
                table.check_grid(grid)?;
                Ok(Vec::new())
            }
        }
    }
}

/// Lower-triangular `L` with `L L^T = rho`, tolerating positive
/// semidefinite (rank-deficient) matrices.
pub fn factor_correlation(rho: &[f64], d: usize) -> Result<Vec<f64>, MarketError> {
    const TOL: f64 = 1e-10;
    if rho.len() != d * d {
        return Err(MarketError::InvalidCorrelation(format!(
            "expected {} entries, found {}",
            d * d,
            rho.len()
        )));
    }
    for i in 0..d {
        if (rho[i * d + i] - 1.0).abs() > TOL {
            return Err(MarketError::InvalidCorrelation(format!(
                "diagonal entry {i} is {}, expected 1",
                rho[i * d + i]
            )));
        }
        for j in 0..i {
            let (a, b) = (rho[i * d + j], rho[j * d + i]);
            if (a - b).abs() > TOL || !a.is_finite() {
                return Err(MarketError::InvalidCorrelation(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut diag = rho[j * d + j];
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if diag < -TOL {
            return Err(MarketError::InvalidCorrelation(
                "matrix is not positive semidefinite".into(),
            ));
        }
        let pivot = diag.max(0.0).sqrt();
        l[j * d + j] = pivot;
        for i in (j + 1)..d {
            let mut v = rho[i * d + j];
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k];
            }
            if pivot > TOL {
                l[i * d + j] = v / pivot;
            } else if v.abs() > 1e-8 {
                return Err(MarketError::InvalidCorrelation(
                    "matrix is not positive semidefinite".into(),
                ));
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let rho = vec![1.0, 0.3, -0.2, 0.3, 1.0, 0.5, -0.2, 0.5, 1.0];
        let l = factor_correlation(&rho, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((v - rho[i * 3 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn semidefinite_matrix_is_accepted() {
        let rho = vec![1.0, 1.0, 1.0, 1.0];
        let l = factor_correlation(&rho, 2).unwrap();
        assert_eq!(l, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let rho = vec![1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0];
        assert!(matches!(
            factor_correlation(&rho, 3),
            Err(MarketError::InvalidCorrelation(_))
        ));
        let asym = vec![1.0, 0.2, 0.1, 1.0];
        assert!(factor_correlation(&asym, 2).is_err());
    }

    #[test]
    fn jump_laws_below_minus_one_are_rejected() {
        assert!(matches!(
            JumpLaw::Fixed(-1.2).validate(),
            Err(MarketError::JumpBelowMinusOne(_))
        ));
        let law = JumpLaw::TwoPoint { low: -1.01, high: 0.2, p_low: 0.5 };
        assert!(law.validate().is_err());
        assert!(JumpLaw::Fixed(-1.0).validate().is_ok());
    }

    #[test]
    fn expectation_of_discrete_and_lognormal_laws() {
        let law = JumpLaw::TwoPoint { low: -0.4, high: 0.25, p_low: 0.5 };
        let m = law.expectation(|j| j);
        assert!((m - (-0.075)).abs() < 1e-15);
        // E[e^Z - 1] = e^{m + s^2/2} - 1
        let law = JumpLaw::ShiftedLogNormal { mean: -0.1, std_dev: 0.3 };
        let m = law.expectation(|j| j);
        assert!((m - ((-0.1f64 + 0.045).exp() - 1.0)).abs() < 1e-12);
        // E[log(1 + J)] = mean
        let l = law.expectation(|j| j.ln_1p());
        assert!((l + 0.1).abs() < 1e-12);
    }

    #[test]
    fn jump_resolution_rule_is_enforced() {
        let model = ModelSpec::merton_1d(0.0, 0.1, 1.0, 20.0, JumpLaw::Fixed(-0.1));
        let coarse = TimeGrid::new(1.0, 100).unwrap();
        assert!(matches!(
            model.validate(&coarse),
            Err(MarketError::JumpResolution { .. })
        ));
        let fine = TimeGrid::new(1.0, 1000).unwrap();
        assert!(model.validate(&fine).is_ok());
    }
}
