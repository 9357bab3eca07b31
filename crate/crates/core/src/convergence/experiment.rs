//! Monte Carlo experiments comparing approximating wealths with the
//! continuous-trading wealth on common paths.
//!
//! Paths are generated, evaluated and dropped inside one parallel task, so
//! memory stays linear in the number of paths times ladder levels. Results
//! are gathered in path order and therefore do not depend on scheduling.

use std::time::Instant;

use rayon::prelude::*;

use super::{
    estimate_exceedance, monotonicity_break, partition_indices, sup_distance, ConvergenceError,
    Exceedance, PartitionLadder,
};
use crate::market::{ModelSpec, Simulator, TimeGrid};
use crate::portfolio::{
    coarse_breakpoints, continuous_path, freeze_strategy, max_gap, multiplicative_path,
    FractionStrategy,
};
use crate::stats::mean;

/// Thresholds as multiples of the initial wealth.
pub const DEFAULT_RELATIVE_EPSILONS: [f64; 3] = [0.05, 0.01, 0.002];

/// Common inputs of the approximation experiments.
#[derive(Clone)]
pub struct ApproximationConfig {
    pub model: ModelSpec,
    pub grid: TimeGrid,
    pub strategy: FractionStrategy,
    pub x: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Thresholds relative to `x`.
    pub relative_epsilons: Vec<f64>,
    /// Record CPU seconds per level; off keeps reports byte-reproducible.
    pub record_timing: bool,
}

impl ApproximationConfig {
    fn check(&self) -> Result<Simulator, ConvergenceError> {
        if !(self.x.is_finite() && self.x > 0.0) {
            return Err(ConvergenceError::InvalidExperiment(format!(
                "initial wealth must be positive, got {}",
                self.x
            )));
        }
        if self.n_paths == 0 {
            return Err(ConvergenceError::EmptyEnsemble);
        }
        if self.relative_epsilons.is_empty() {
            return Err(ConvergenceError::InvalidExperiment("no thresholds".into()));
        }
        if let Some(&e) = self.relative_epsilons.iter().find(|e| !(**e > 0.0)) {
            return Err(ConvergenceError::InvalidThreshold(e));
        }
        let sim = Simulator::new(&self.model, self.grid)?;
        self.strategy
            .check_shape(sim.dim(), self.grid.n_steps(), self.n_paths)?;
        Ok(sim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    /// Ladder parameter, e.g. `uniform(64)`.
    pub label: String,
    /// Max rebalancing gap in time units, averaged over paths.
    pub mesh: f64,
    pub epsilon: f64,
    pub exceedance: Exceedance,
    pub n_paths: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    /// Level-major, thresholds in the configured order within a level.
    pub rows: Vec<ConvergenceRow>,
    /// `distances[level][path]`.
    pub distances: Vec<Vec<f64>>,
    /// Paths on which the continuous wealth hit zero (a step with
    /// `<pi, ΔR> = -1`).
    pub bankrupt_paths: usize,
}

impl ConvergenceReport {
    pub fn epsilons(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.epsilon) {
                out.push(r.epsilon);
            }
        }
        out
    }

    /// Exceedance along the ladder at threshold `epsilon`.
    pub fn column(&self, epsilon: f64) -> Vec<Exceedance> {
        self.rows
            .iter()
            .filter(|r| r.epsilon == epsilon)
            .map(|r| r.exceedance)
            .collect()
    }

    /// True when every threshold column is non-increasing up to CI overlap.
    pub fn is_monotone(&self) -> bool {
        self.epsilons()
            .into_iter()
            .all(|e| monotonicity_break(&self.column(e)).is_none())
    }

    /// Upper CI bound of the finest level at `epsilon`.
    pub fn final_upper(&self, epsilon: f64) -> Option<f64> {
        self.column(epsilon).last().map(|e| e.ci_hi)
    }
}

struct PathOutcome {
    distances: Vec<f64>,
    meshes: Vec<f64>,
    seconds: Vec<f64>,
    bankrupt: bool,
}

fn assemble(
    cfg: &ApproximationConfig,
    labels: Vec<String>,
    outcomes: Vec<PathOutcome>,
) -> Result<ConvergenceReport, ConvergenceError> {
    let levels = labels.len();
    let mut distances = vec![Vec::with_capacity(outcomes.len()); levels];
    let mut meshes = vec![Vec::with_capacity(outcomes.len()); levels];
    let mut seconds = vec![Vec::with_capacity(outcomes.len()); levels];
    for o in &outcomes {
        for l in 0..levels {
            distances[l].push(o.distances[l]);
            meshes[l].push(o.meshes[l]);
            seconds[l].push(o.seconds[l]);
        }
    }
    let mut rows = Vec::with_capacity(levels * cfg.relative_epsilons.len());
    for (l, label) in labels.into_iter().enumerate() {
        let level_mesh = mean(&meshes[l]);
        let level_seconds = if cfg.record_timing {
            crate::stats::pairwise_sum(&seconds[l])
        } else {
            0.0
        };
        for &rel in &cfg.relative_epsilons {
            let epsilon = rel * cfg.x;
            rows.push(ConvergenceRow {
                level: l,
                label: label.clone(),
                mesh: level_mesh,
                epsilon,
                exceedance: estimate_exceedance(&distances[l], epsilon)?,
                n_paths: cfg.n_paths,
                seconds: level_seconds,
            });
        }
    }
    Ok(ConvergenceReport {
        rows,
        distances,
        bankrupt_paths: outcomes.iter().filter(|o| o.bankrupt).count(),
    })
}

fn elapsed(start: Option<Instant>) -> f64 {
    start.map_or(0.0, |s| s.elapsed().as_secs_f64())
}

/// Multiplicative buy-and-hold wealth on each ladder partition against the
/// continuous wealth of the same strategy.
pub fn run_multiplicative_convergence(
    cfg: &ApproximationConfig,
    ladder: &PartitionLadder,
) -> Result<ConvergenceReport, ConvergenceError> {
    let sim = cfg.check()?;
    ladder.check_grid(&cfg.grid)?;
    let grid = cfg.grid;
    let rules = ladder.rules();
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let path = sim.path(cfg.seed, p);
            let view = path.view(p, grid);
            let mut reference = Vec::new();
            continuous_path(cfg.x, &cfg.strategy, &view, &mut reference);
            let mut approx = Vec::new();
            let mut out = PathOutcome {
                distances: Vec::with_capacity(rules.len()),
                meshes: Vec::with_capacity(rules.len()),
                seconds: Vec::with_capacity(rules.len()),
                bankrupt: reference.last() == Some(&0.0),
            };
            for &rule in rules {
                let start = cfg.record_timing.then(Instant::now);
                let indices = partition_indices(rule, &view);
                multiplicative_path(cfg.x, &cfg.strategy, &indices, &view, &mut approx, None);
                out.distances.push(sup_distance(&approx, &reference));
                out.meshes.push(max_gap(&indices) as f64 * grid.dt());
                out.seconds.push(elapsed(start));
            }
            out
        })
        .collect();
    assemble(cfg, rules.iter().map(ToString::to_string).collect(), outcomes)
}

/// Continuous wealth under the strategy frozen on `m` coarse intervals
/// against the continuous wealth under the original strategy.
pub fn run_freeze_convergence(
    cfg: &ApproximationConfig,
    coarse_steps: &[usize],
) -> Result<ConvergenceReport, ConvergenceError> {
    let sim = cfg.check()?;
    if coarse_steps.is_empty() || coarse_steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConvergenceError::InvalidLadder(
            "coarse step counts must be strictly increasing".into(),
        ));
    }
    let grid = cfg.grid;
    let frozen = coarse_steps
        .iter()
        .map(|&m| freeze_strategy(&cfg.strategy, m, &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let meshes: Vec<f64> = coarse_steps
        .iter()
        .map(|&m| max_gap(&coarse_breakpoints(grid.n_steps(), m)) as f64 * grid.dt())
        .collect();
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let path = sim.path(cfg.seed, p);
            let view = path.view(p, grid);
            let mut reference = Vec::new();
            continuous_path(cfg.x, &cfg.strategy, &view, &mut reference);
            let mut approx = Vec::new();
            let mut out = PathOutcome {
                distances: Vec::with_capacity(frozen.len()),
                meshes: meshes.clone(),
                seconds: Vec::with_capacity(frozen.len()),
                bankrupt: reference.last() == Some(&0.0),
            };
            for strategy in &frozen {
                let start = cfg.record_timing.then(Instant::now);
                continuous_path(cfg.x, strategy, &view, &mut approx);
                out.distances.push(sup_distance(&approx, &reference));
                out.seconds.push(elapsed(start));
            }
            out
        })
        .collect();
    let labels = coarse_steps.iter().map(|m| format!("freeze({m})")).collect();
    assemble(cfg, labels, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::JumpLaw;
    use crate::portfolio::{PartitionRule, SimplexVector};

    fn merton() -> ModelSpec {
        ModelSpec::merton_1d(
            0.07,
            0.2,
            1.0,
            1.0,
            JumpLaw::TwoPoint { low: -0.4, high: 0.25, p_low: 0.5 },
        )
    }

    fn config(pi: f64, n: usize, n_paths: usize) -> ApproximationConfig {
        ApproximationConfig {
            model: merton(),
            grid: TimeGrid::new(1.0, n).unwrap(),
            strategy: FractionStrategy::constant(SimplexVector::new(vec![pi]).unwrap()),
            x: 1.0,
            n_paths,
            seed: 7,
            relative_epsilons: vec![0.01],
            record_timing: false,
        }
    }

    #[test]
    fn full_investment_is_exact_at_every_level() {
        let ladder = PartitionLadder::new(vec![PartitionRule::Uniform(4), PartitionRule::Uniform(16)]).unwrap();
        let report = run_multiplicative_convergence(&config(1.0, 64, 50), &ladder).unwrap();
        for row in &report.rows {
            assert_eq!(row.exceedance.p_hat, 0.0);
        }
        assert!(report.distances.iter().flatten().all(|&d| d < 1e-12));
    }

    #[test]
    fn fine_ladder_is_exact() {
        let ladder = PartitionLadder::new(vec![PartitionRule::Uniform(64)]).unwrap();
        let report = run_multiplicative_convergence(&config(0.6, 64, 50), &ladder).unwrap();
        assert!(report.distances[0].iter().all(|&d| d < 1e-12));
    }

    #[test]
    fn distances_shrink_along_ladder() {
        let ladder = PartitionLadder::new(vec![
            PartitionRule::Uniform(2),
            PartitionRule::Uniform(16),
            PartitionRule::Uniform(128),
        ])
        .unwrap();
        let report = run_multiplicative_convergence(&config(0.6, 256, 200), &ladder).unwrap();
        let means: Vec<f64> = report.distances.iter().map(|d| mean(d)).collect();
        assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
        assert_eq!(report.rows[0].mesh, 0.5);
    }

    #[test]
    fn constant_strategy_freezes_to_itself() {
        let report = run_freeze_convergence(&config(0.6, 64, 20), &[2, 8]).unwrap();
        assert!(report.distances.iter().flatten().all(|&d| d == 0.0));
        assert!(run_freeze_convergence(&config(0.6, 64, 20), &[8, 2]).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let ladder = PartitionLadder::new(vec![PartitionRule::Uniform(4)]).unwrap();
        let mut cfg = config(0.6, 64, 10);
        cfg.relative_epsilons = vec![0.0];
        assert!(run_multiplicative_convergence(&cfg, &ladder).is_err());
        let mut cfg = config(0.6, 2, 10);
        cfg.relative_epsilons = vec![0.01];
        assert!(run_multiplicative_convergence(&cfg, &ladder).is_err());
    }
}
