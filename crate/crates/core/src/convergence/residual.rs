//! Pathwise decomposition of `log(X^Π_T / X_T)`.
//!
//! With `η_k = π_k / S_k` (zero on dead assets) and the one-step portfolio
//! return `y_k = <η_k, S_{k+1} - S_k>`, the log ratio of multiplicative to
//! continuous wealth splits as
//!
//! ```text
//! LHS = A - (B - C - D) + residual
//! A = Σ_j log(1 + <η_{a_j}, S_{a_{j+1}} - S_{a_j}>)   over partition intervals
//! B = Σ_k y_k
//! C = ½ Σ y_k²                over steps without a jump mark
//! D = Σ (y_k - log(1 + y_k))  over steps with a jump mark
//! ```
//!
//! On the grid the residual is `-Σ_{no jump} (log(1 + y) - y + y²/2)`, a
//! third-order remainder that vanishes as the fine grid refines.

use rayon::prelude::*;

use super::{partition_indices, ConvergenceError};
use crate::market::{AssetPaths, ModelSpec, PathView, Simulator, TimeGrid};
use crate::portfolio::{
    continuous_path, multiplicative_path, FractionStrategy, Partition, PartitionRule,
};
use crate::stats::{mean, median};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualDecomposition {
    /// `log(X^Π_T / X_T)`.
    pub lhs: f64,
    pub log_factors: f64,
    pub integral: f64,
    pub quadratic_variation: f64,
    pub jump_compensation: f64,
    pub residual: f64,
}

fn eta_increment(pi: &[f64], from: &[f64], to: &[f64], jumps: Option<(bool, &[bool])>) -> f64 {
    let mut acc = 0.0;
    for i in 0..pi.len() {
        if from[i] > 0.0 && pi[i] != 0.0 {
            if let Some((want, marks)) = jumps {
                if marks[i] != want {
                    continue;
                }
            }
            acc += pi[i] / from[i] * (to[i] - from[i]);
        }
    }
    acc
}

fn first_nonpositive(values: &[f64]) -> Option<usize> {
    values.iter().position(|&v| !(v > 0.0))
}

/// Decomposition on one path for rebalancing `indices`.
pub fn residual_path(
    x: f64,
    strategy: &FractionStrategy,
    indices: &[usize],
    view: &PathView<'_>,
) -> Result<ResidualDecomposition, ConvergenceError> {
    let n = view.n_steps();
    let mut cont = Vec::new();
    let mut mult = Vec::new();
    continuous_path(x, strategy, view, &mut cont);
    multiplicative_path(x, strategy, indices, view, &mut mult, None);
    if let Some(index) = first_nonpositive(&cont).or(first_nonpositive(&mult)) {
        return Err(ConvergenceError::NonPositiveWealth { path: view.index, index });
    }

    let d = view.dim;
    let mut pi = vec![0.0; d];
    let mut log_factors = Vec::with_capacity(indices.len());
    for w in indices.windows(2) {
        strategy.fractions_into(view, w[0], &mut pi);
        log_factors.push(eta_increment(&pi, view.row(w[0]), view.row(w[1]), None).ln_1p());
    }

    let mut integral = Vec::with_capacity(n);
    let mut quadratic = Vec::with_capacity(n);
    let mut jumps = Vec::new();
    let mut marks = vec![false; d];
    for k in 0..n {
        strategy.fractions_into(view, k, &mut pi);
        let (from, to) = (view.row(k), view.row(k + 1));
        let y = eta_increment(&pi, from, to, None);
        integral.push(y);
        for (i, m) in marks.iter_mut().enumerate() {
            *m = view.jump_mark(k + 1, i);
        }
        let yc = eta_increment(&pi, from, to, Some((false, &marks)));
        quadratic.push(0.5 * yc * yc);
        if marks.iter().any(|&m| m) {
            // Only the jump-marked coordinates carry the jump; the rest of
            // the step is continuous and already counted in `quadratic`.
            let yj = eta_increment(&pi, from, to, Some((true, &marks)));
            jumps.push(yj - yj.ln_1p());
        }
    }

    let sum = crate::stats::pairwise_sum;
    let lhs = mult[n].ln() - cont[n].ln();
    let a = sum(&log_factors);
    let b = sum(&integral);
    let c = sum(&quadratic);
    let dj = sum(&jumps);
    Ok(ResidualDecomposition {
        lhs,
        log_factors: a,
        integral: b,
        quadratic_variation: c,
        jump_compensation: dj,
        residual: lhs - (a - (b - c - dj)),
    })
}

/// Decomposition on every path of `paths`.
pub fn log_ratio_residual(
    x: f64,
    strategy: &FractionStrategy,
    partition: &Partition,
    paths: &AssetPaths,
) -> Result<Vec<ResidualDecomposition>, ConvergenceError> {
    if partition.n_steps() != paths.grid().n_steps() {
        return Err(ConvergenceError::GridMismatch);
    }
    if !(x > 0.0) {
        return Err(ConvergenceError::InvalidExperiment(format!(
            "initial wealth must be positive, got {x}"
        )));
    }
    strategy.check_shape(paths.dim(), paths.grid().n_steps(), paths.n_paths())?;
    (0..paths.n_paths())
        .into_par_iter()
        .map(|p| residual_path(x, strategy, partition.indices(p), &paths.path(p)))
        .collect()
}

/// Residual magnitude along a ladder of fine grids.
#[derive(Clone)]
pub struct ResidualConfig {
    pub model: ModelSpec,
    pub horizon: f64,
    pub fine_steps: Vec<usize>,
    /// Applied as `strategy.scaled(scale_eps)`, keeping wealth positive.
    pub strategy: FractionStrategy,
    pub scale_eps: f64,
    pub partition: PartitionRule,
    pub x: f64,
    pub n_paths: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub n_steps: usize,
    pub median_abs: f64,
    pub mean_abs: f64,
    pub max_abs: f64,
    /// Previous row's median over this row's median.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
}

impl ResidualReport {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].median_abs < w[0].median_abs)
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }
}

pub fn run_residual_experiment(cfg: &ResidualConfig) -> Result<ResidualReport, ConvergenceError> {
    if cfg.fine_steps.is_empty() || cfg.fine_steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConvergenceError::InvalidLadder(
            "fine step counts must be strictly increasing".into(),
        ));
    }
    if cfg.n_paths == 0 {
        return Err(ConvergenceError::EmptyEnsemble);
    }
    if !(cfg.x > 0.0) {
        return Err(ConvergenceError::InvalidExperiment(format!(
            "initial wealth must be positive, got {}",
            cfg.x
        )));
    }
    let strategy = cfg.strategy.scaled(cfg.scale_eps)?;
    let mut rows: Vec<ResidualRow> = Vec::with_capacity(cfg.fine_steps.len());
    for &n in &cfg.fine_steps {
        let grid = TimeGrid::new(cfg.horizon, n)?;
        let sim = Simulator::new(&cfg.model, grid)?;
        strategy.check_shape(sim.dim(), n, cfg.n_paths)?;
        let abs: Vec<f64> = (0..cfg.n_paths)
            .into_par_iter()
            .map(|p| {
                let path = sim.path(cfg.seed, p);
                let view = path.view(p, grid);
                let indices = partition_indices(cfg.partition, &view);
                residual_path(cfg.x, &strategy, &indices, &view).map(|r| r.residual.abs())
            })
            .collect::<Result<_, _>>()?;
        let median_abs = median(&abs);
        rows.push(ResidualRow {
            n_steps: n,
            median_abs,
            mean_abs: mean(&abs),
            max_abs: abs.iter().copied().fold(0.0, f64::max),
            ratio: rows.last().map(|prev| prev.median_abs / median_abs),
        });
    }
    Ok(ResidualReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::{build_partition, PartitionLadder};
    use crate::market::{simulate, JumpLaw, PriceTable};
    use crate::portfolio::SimplexVector;

    fn constant(pi: f64) -> FractionStrategy {
        FractionStrategy::constant(SimplexVector::new(vec![pi]).unwrap())
    }

    #[test]
    fn deterministic_market_has_zero_residual() {
        let grid = TimeGrid::new(1.0, 1024).unwrap();
        let model = ModelSpec::black_scholes_1d(0.07, 0.0, 1.0);
        let paths = simulate(&model, grid, 3, 1).unwrap();
        for rule in [PartitionRule::Uniform(8), PartitionRule::Uniform(1024)] {
            let ladder = PartitionLadder::new(vec![rule]).unwrap();
            let partition = build_partition(&ladder, 0, &paths).unwrap();
            for r in log_ratio_residual(1.0, &constant(0.54), &partition, &paths).unwrap() {
                assert!(r.residual.abs() < 1e-10, "{r:?}");
                assert!(r.lhs.is_finite() && r.quadratic_variation >= 0.0);
            }
        }
    }

    #[test]
    fn fine_partition_has_zero_log_ratio() {
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let model = ModelSpec::merton_1d(0.07, 0.2, 1.0, 1.0, JumpLaw::Fixed(-0.4));
        let paths = simulate(&model, grid, 20, 3).unwrap();
        let r = log_ratio_residual(1.0, &constant(0.5), &Partition::fine(256), &paths).unwrap();
        for d in r {
            assert!(d.lhs.abs() < 1e-12);
        }
    }

    #[test]
    fn residual_does_not_depend_on_partition() {
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let model = ModelSpec::merton_1d(0.07, 0.2, 1.0, 2.0, JumpLaw::Fixed(0.25));
        let paths = simulate(&model, grid, 10, 5).unwrap();
        let coarse = Partition::shared(128, vec![0, 64, 128]).unwrap();
        let a = log_ratio_residual(1.0, &constant(0.5), &coarse, &paths).unwrap();
        let b = log_ratio_residual(1.0, &constant(0.5), &Partition::fine(128), &paths).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.residual - y.residual).abs() < 1e-12);
        }
    }

    #[test]
    fn jump_steps_feed_the_compensation_term() {
        // One marked jump of -50% and one quiet step.
        let table = PriceTable::uniform(1.0, vec![vec![1.0], vec![0.5], vec![0.5]])
            .unwrap()
            .with_marks(vec![vec![false], vec![true], vec![false]])
            .unwrap();
        let grid = table.grid();
        let paths = simulate(&ModelSpec::Fixture(table), grid, 1, 0).unwrap();
        let r = log_ratio_residual(1.0, &constant(0.5), &Partition::fine(2), &paths).unwrap()[0];
        let y: f64 = -0.25;
        assert!((r.jump_compensation - (y - y.ln_1p())).abs() < 1e-15);
        assert_eq!(r.quadratic_variation, 0.0);
        assert!(r.residual.abs() < 1e-15);
    }

    #[test]
    fn wealth_hitting_zero_is_rejected() {
        let table = PriceTable::uniform(1.0, vec![vec![1.0], vec![0.0]]).unwrap();
        let grid = table.grid();
        let paths = simulate(&ModelSpec::Fixture(table), grid, 1, 0).unwrap();
        let err = log_ratio_residual(1.0, &constant(1.0), &Partition::fine(1), &paths);
        assert_eq!(err, Err(ConvergenceError::NonPositiveWealth { path: 0, index: 1 }));
    }
}
