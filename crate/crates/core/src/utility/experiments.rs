//! Utility experiments: indirect-utility gap, terminal convergence and
//! uniform convergence of the multiplicative discretisation of the
//! continuous optimiser.
//!
//! All three share one Monte Carlo pass: on every path the continuous
//! optimal wealth `X̂` and the discretised wealths `X^k` for each ladder
//! level are computed on common increments.

use rayon::prelude::*;

use super::{
    expected_utility, optimize_constant_fraction, GrowthProblem, UtilityError, UtilityEstimate,
    UtilityFn,
};
use crate::convergence::{
    estimate_exceedance, estimate_weighted_exceedance, partition_indices, Exceedance,
    PartitionLadder,
};
use crate::market::{ModelSpec, Simulator, TimeGrid};
use crate::portfolio::{
    continuous_path, max_gap, multiplicative_path, FractionStrategy, SimplexVector,
};
use crate::stats::{mean, pairwise_sum, Z_95};

/// Strict-concavity diagnostic levels.
pub const KM_LEVELS: [f64; 3] = [1.0, 2.0, 4.0];

#[derive(Debug, Clone)]
pub struct UtilityConfig {
    pub model: ModelSpec,
    pub grid: TimeGrid,
    pub utility: UtilityFn,
    pub x: f64,
    pub ladder: PartitionLadder,
    pub n_paths: usize,
    pub seed: u64,
    /// Exceedance threshold relative to `x`.
    pub epsilon: f64,
    /// Constant fractions to discretise; the growth optimiser is used when
    /// absent.
    pub fractions: Option<SimplexVector>,
    /// Shift both wealths to `s + (1 - s/x) X` before evaluating utility.
    pub shift: Option<f64>,
}

/// Which statistic the report's interval columns describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityFocus {
    Gap,
    Terminal,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityRow {
    pub level: usize,
    pub label: String,
    pub mesh: f64,
    pub eu_simple: UtilityEstimate,
    pub eu_ref: f64,
    /// Zero when the reference is in closed form.
    pub se_ref: f64,
    pub gap: f64,
    pub terminal: Exceedance,
    /// `None` when the weights cannot be normalised.
    pub uniform: Option<Exceedance>,
    /// `E[U'(X̂_T) X^k_T] / E[U'(X̂_T) X̂_T]`; at most 1 up to noise.
    pub dual_ratio: f64,
}

impl UtilityRow {
    /// Interval reported next to the row for `focus`.
    pub fn interval(&self, focus: UtilityFocus) -> (f64, f64) {
        match focus {
            UtilityFocus::Gap => (
                self.eu_simple.mean - Z_95 * self.eu_simple.se,
                self.eu_simple.mean + Z_95 * self.eu_simple.se,
            ),
            UtilityFocus::Terminal => (self.terminal.ci_lo, self.terminal.ci_hi),
            UtilityFocus::Uniform => self
                .uniform
                .map_or((f64::NAN, f64::NAN), |u| (u.ci_lo, u.ci_hi)),
        }
    }
}

/// `β_m` and the frequency of `(X^k_T, X̂_T) ∈ K_m`, where `K_m` holds the
/// pairs in `[0, m]²` at distance at least `1/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct KmRow {
    pub level: usize,
    pub m: f64,
    pub beta: f64,
    pub p_km: f64,
    /// `β_m · P[K_m]`, a lower bound for the expected concavity gain.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityReport {
    pub focus: UtilityFocus,
    pub fractions: SimplexVector,
    /// Optimiser objective at `fractions` (NaN if they were supplied).
    pub growth_rate: f64,
    pub rows: Vec<UtilityRow>,
    pub km: Vec<KmRow>,
    /// Sum of the normalised change-of-measure weights.
    pub weight_sum: f64,
}

impl UtilityReport {
    /// `E[U(X^k_T)] <= u(x)` within three combined standard errors.
    pub fn simple_below_reference(&self) -> bool {
        self.rows.iter().all(|r| {
            let tol = 3.0 * (r.eu_simple.se.powi(2) + r.se_ref.powi(2)).sqrt();
            r.eu_simple.mean <= r.eu_ref + tol
        })
    }
}

struct PathOutcome {
    hat_terminal: f64,
    terminal: Vec<f64>,
    relative_sup: Vec<f64>,
    meshes: Vec<f64>,
}

fn relative_deviation(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        (a / b - 1.0).abs()
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn closed_form_reference(
    cfg: &UtilityConfig,
    fractions: &SimplexVector,
) -> Option<f64> {
    if cfg.shift.is_some() || cfg.model.jumps().is_some_and(|j| j.intensity.iter().any(|&l| l > 0.0)) {
        return None;
    }
    let diffusion = cfg.model.diffusion()?;
    let pi = fractions.as_slice();
    let d = pi.len();
    let cov = diffusion.covariance();
    let drift: f64 = pi.iter().zip(&diffusion.drift).map(|(p, m)| p * m).sum();
    let var: f64 = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| pi[i] * cov[i * d + j] * pi[j])
        .sum();
    let t = cfg.grid.horizon();
    // Continuous wealth is x exp((drift - var/2) t + sqrt(var) W_t).
    let log_mean = cfg.x.ln() + (drift - 0.5 * var) * t;
    match cfg.utility {
        UtilityFn::Log => Some(log_mean),
        UtilityFn::Crra(g) => {
            let a = 1.0 - g;
            let moment = (a * log_mean + 0.5 * a * a * var * t).exp();
            Some((moment - 1.0) / a)
        }
        UtilityFn::PiecewiseConcave(_) => None,
    }
}

fn optimal_fractions(cfg: &UtilityConfig) -> Result<(SimplexVector, f64), UtilityError> {
    if let Some(f) = &cfg.fractions {
        return Ok((f.clone(), f64::NAN));
    }
    let gamma = match cfg.utility {
        UtilityFn::Log => 1.0,
        UtilityFn::Crra(g) => g,
        UtilityFn::PiecewiseConcave(_) => {
            return Err(UtilityError::InvalidProblem(
                "table utilities need explicit fractions".into(),
            ))
        }
    };
    let problem = GrowthProblem::from_model(&cfg.model)?.with_risk_aversion(gamma)?;
    let result = optimize_constant_fraction(&problem)?;
    Ok((result.fractions, result.value))
}

fn run(cfg: &UtilityConfig, focus: UtilityFocus) -> Result<UtilityReport, UtilityError> {
    cfg.utility.validate()?;
    if !(cfg.x.is_finite() && cfg.x > 0.0) {
        return Err(UtilityError::InvalidProblem(format!(
            "initial wealth must be positive, got {}",
            cfg.x
        )));
    }
    if let Some(s) = cfg.shift {
        if !(s > 0.0 && s < cfg.x) {
            return Err(UtilityError::InvalidProblem(format!(
                "shift {s} must lie strictly between 0 and {}",
                cfg.x
            )));
        }
    }
    if focus == UtilityFocus::Terminal && !cfg.utility.is_strict() {
        return Err(UtilityError::InvalidUtility(
            "terminal convergence needs a strictly concave utility".into(),
        ));
    }
    cfg.ladder.check_grid(&cfg.grid)?;
    let sim = Simulator::new(&cfg.model, cfg.grid)?;
    let (fractions, growth_rate) = optimal_fractions(cfg)?;
    if fractions.dim() != sim.dim() {
        return Err(UtilityError::InvalidProblem(format!(
            "fractions have dimension {}, model has {}",
            fractions.dim(),
            sim.dim()
        )));
    }
    let strategy = FractionStrategy::constant(fractions.clone());
    let grid = cfg.grid;
    let rules = cfg.ladder.rules();
    let shift = |w: &mut Vec<f64>| {
        if let Some(s) = cfg.shift {
            for v in w.iter_mut() {
                *v = s + (1.0 - s / cfg.x) * *v;
            }
        }
    };

    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let path = sim.path(cfg.seed, p);
            let view = path.view(p, grid);
            let mut hat = Vec::new();
            continuous_path(cfg.x, &strategy, &view, &mut hat);
            shift(&mut hat);
            let mut approx = Vec::new();
            let mut out = PathOutcome {
                hat_terminal: hat[grid.n_steps()],
                terminal: Vec::with_capacity(rules.len()),
                relative_sup: Vec::with_capacity(rules.len()),
                meshes: Vec::with_capacity(rules.len()),
            };
            for &rule in rules {
                let indices = partition_indices(rule, &view);
                multiplicative_path(cfg.x, &strategy, &indices, &view, &mut approx, None);
                shift(&mut approx);
                out.terminal.push(approx[grid.n_steps()]);
                out.relative_sup.push(
                    approx
                        .iter()
                        .zip(&hat)
                        .map(|(&a, &b)| relative_deviation(a, b))
                        .fold(0.0, f64::max),
                );
                out.meshes.push(max_gap(&indices) as f64 * grid.dt());
            }
            out
        })
        .collect();

    let hat_terminal: Vec<f64> = outcomes.iter().map(|o| o.hat_terminal).collect();
    let (eu_ref, se_ref) = match closed_form_reference(cfg, &fractions) {
        Some(v) => (v, 0.0),
        None => {
            let e = expected_utility(&hat_terminal, &cfg.utility)?;
            (e.mean, e.se)
        }
    };

    let raw: Vec<f64> = hat_terminal
        .iter()
        .map(|&w| cfg.utility.wealth_times_marginal(w))
        .collect();
    let normalizer = pairwise_sum(&raw);
    let weights: Option<Vec<f64>> = (normalizer.is_finite() && normalizer > 0.0
        && raw.iter().all(|w| w.is_finite()))
    .then(|| raw.iter().map(|w| w / normalizer).collect());
    if focus == UtilityFocus::Uniform && weights.is_none() {
        return Err(UtilityError::WeightNormalization(normalizer));
    }
    let weight_sum = weights.as_ref().map_or(f64::NAN, |w| pairwise_sum(w));
    let marginal: Vec<f64> = hat_terminal.iter().map(|&w| cfg.utility.marginal(w)).collect();
    let hat_dual: Vec<f64> = marginal.iter().zip(&hat_terminal).map(|(u, w)| u * w).collect();

    let eps = cfg.epsilon * cfg.x;
    let mut rows = Vec::with_capacity(rules.len());
    let mut km = Vec::new();
    for (l, rule) in rules.iter().enumerate() {
        let terminal: Vec<f64> = outcomes.iter().map(|o| o.terminal[l]).collect();
        let sup: Vec<f64> = outcomes.iter().map(|o| o.relative_sup[l]).collect();
        let gaps: Vec<f64> = terminal.iter().zip(&hat_terminal).map(|(a, b)| (a - b).abs()).collect();
        let eu_simple = expected_utility(&terminal, &cfg.utility)?;
        let uniform = match &weights {
            Some(w) => Some(estimate_weighted_exceedance(&sup, w, cfg.epsilon)?),
            None => None,
        };
        let dual: Vec<f64> = marginal.iter().zip(&terminal).map(|(u, w)| u * w).collect();
        rows.push(UtilityRow {
            level: l,
            label: rule.to_string(),
            mesh: mean(&outcomes.iter().map(|o| o.meshes[l]).collect::<Vec<_>>()),
            eu_simple,
            eu_ref,
            se_ref,
            gap: eu_ref - eu_simple.mean,
            terminal: estimate_exceedance(&gaps, eps)?,
            uniform,
            dual_ratio: pairwise_sum(&dual) / pairwise_sum(&hat_dual),
        });
        if focus == UtilityFocus::Terminal {
            for m in KM_LEVELS {
                let beta = cfg.utility.concavity_gap(m);
                let inside = terminal
                    .iter()
                    .zip(&hat_terminal)
                    .filter(|(&a, &b)| a <= m && b <= m && (a - b).abs() >= 1.0 / m)
                    .count();
                let p_km = inside as f64 / cfg.n_paths as f64;
                km.push(KmRow { level: l, m, beta, p_km, bound: beta * p_km });
            }
        }
    }
    Ok(UtilityReport { focus, fractions, growth_rate, rows, km, weight_sum })
}

/// Expected utility of the discretised optimiser against the indirect
/// utility of continuous trading.
pub fn run_indirect_utility_gap(cfg: &UtilityConfig) -> Result<UtilityReport, UtilityError> {
    run(cfg, UtilityFocus::Gap)
}

/// `P[|X^k_T - X̂_T| > ε]` along the ladder with the `K_m` diagnostic.
pub fn run_terminal_convergence(cfg: &UtilityConfig) -> Result<UtilityReport, UtilityError> {
    run(cfg, UtilityFocus::Terminal)
}

/// `Q[sup_t |X^k_t / X̂_t - 1| > ε]` with `dQ/dP ∝ X̂_T U'(X̂_T)`.
pub fn run_uniform_convergence(cfg: &UtilityConfig) -> Result<UtilityReport, UtilityError> {
    run(cfg, UtilityFocus::Uniform)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::PartitionRule;

    fn config(model: ModelSpec, utility: UtilityFn, rules: Vec<PartitionRule>) -> UtilityConfig {
        UtilityConfig {
            model,
            grid: TimeGrid::new(1.0, 256).unwrap(),
            utility,
            x: 1.0,
            ladder: PartitionLadder::new(rules).unwrap(),
            n_paths: 400,
            seed: 11,
            epsilon: 0.01,
            fractions: None,
            shift: None,
        }
    }

    #[test]
    fn full_investment_has_no_gap() {
        let cfg = config(
            ModelSpec::black_scholes_1d(0.08, 0.2, 1.0),
            UtilityFn::Log,
            vec![PartitionRule::Uniform(4), PartitionRule::Uniform(64)],
        );
        let r = run_indirect_utility_gap(&cfg).unwrap();
        assert_eq!(r.fractions.as_slice(), &[1.0]);
        assert!((r.rows[0].eu_ref - 0.06).abs() < 1e-15);
        assert!((r.rows[0].eu_simple.mean - r.rows[1].eu_simple.mean).abs() < 1e-14);
        for row in &r.rows {
            assert!((row.gap).abs() < 4.0 * row.eu_simple.se);
            assert_eq!(row.terminal.p_hat, 0.0);
        }
    }

    #[test]
    fn no_premium_means_log_x_everywhere() {
        let mut cfg = config(
            ModelSpec::black_scholes_1d(-0.02, 0.2, 1.0),
            UtilityFn::Log,
            vec![PartitionRule::Uniform(4)],
        );
        cfg.x = 2.0;
        let r = run_indirect_utility_gap(&cfg).unwrap();
        assert!((r.rows[0].eu_simple.mean - 2f64.ln()).abs() < 1e-14);
        assert!(r.rows[0].gap.abs() < 1e-14);
    }

    #[test]
    fn fine_ladder_has_zero_gap() {
        let mut cfg = config(
            ModelSpec::black_scholes_1d(0.02, 0.2, 1.0),
            UtilityFn::Log,
            vec![PartitionRule::Uniform(256)],
        );
        cfg.n_paths = 100;
        let r = run_terminal_convergence(&cfg).unwrap();
        assert!((r.fractions[0] - 0.5).abs() < 1e-6);
        assert_eq!(r.rows[0].terminal.p_hat, 0.0);
        assert_eq!(r.rows[0].uniform.unwrap().p_hat, 0.0);
        assert_eq!(r.km.len(), KM_LEVELS.len());
        assert!(r.km.iter().all(|k| k.p_km == 0.0 && k.beta > 0.0));
    }

    #[test]
    fn crra_weights_normalise() {
        let mut cfg = config(
            ModelSpec::black_scholes_1d(0.04, 0.2, 1.0),
            UtilityFn::crra(2.0).unwrap(),
            vec![PartitionRule::Uniform(4), PartitionRule::Uniform(32)],
        );
        cfg.n_paths = 300;
        let r = run_uniform_convergence(&cfg).unwrap();
        assert!((r.weight_sum - 1.0).abs() < 1e-12);
        assert!(r.simple_below_reference());
    }

    #[test]
    fn table_utility_rejected_for_terminal_run() {
        let mut cfg = config(
            ModelSpec::black_scholes_1d(0.04, 0.2, 1.0),
            UtilityFn::piecewise(vec![(0.0, 0.0), (1.0, 1.0), (2.0, 1.5)]).unwrap(),
            vec![PartitionRule::Uniform(4)],
        );
        cfg.fractions = Some(SimplexVector::new(vec![0.5]).unwrap());
        assert!(run_terminal_convergence(&cfg).is_err());
        assert!(run_indirect_utility_gap(&cfg).is_ok());
    }
}
