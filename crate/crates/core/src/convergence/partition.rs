use super::ConvergenceError;
use crate::market::{AssetPaths, PathView, TimeGrid};
use crate::portfolio::{max_gap, Partition, PartitionRule};

/// A sequence of partition rules whose mesh shrinks along the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionLadder {
    rules: Vec<PartitionRule>,
}

impl PartitionLadder {
    /// Rules must share one generator and get strictly finer: `n` and `k`
    /// increasing for uniform and dyadic ladders, `delta` decreasing to 0
    /// for price-triggered ones.
    pub fn new(rules: Vec<PartitionRule>) -> Result<Self, ConvergenceError> {
        let first = rules
            .first()
            .ok_or_else(|| ConvergenceError::InvalidLadder("ladder is empty".into()))?;
        for rule in &rules {
            let ok = match rule {
                PartitionRule::Uniform(n) => *n >= 1,
                PartitionRule::Dyadic(k) => *k < 63,
                PartitionRule::PriceTriggered(delta) => delta.is_finite() && *delta > 0.0,
            };
            if !ok {
                return Err(ConvergenceError::InvalidLadder(format!("invalid rule {rule}")));
            }
            if std::mem::discriminant(rule) != std::mem::discriminant(first) {
                return Err(ConvergenceError::InvalidLadder(
                    "all ladder levels must use the same generator".into(),
                ));
            }
        }
        for w in rules.windows(2) {
            let finer = match (w[0], w[1]) {
                (PartitionRule::Uniform(a), PartitionRule::Uniform(b)) => b > a,
                (PartitionRule::Dyadic(a), PartitionRule::Dyadic(b)) => b > a,
                (PartitionRule::PriceTriggered(a), PartitionRule::PriceTriggered(b)) => b < a,
                _ => false,
            };
            if !finer {
                return Err(ConvergenceError::InvalidLadder(format!(
                    "level {} does not refine level {}",
                    w[1], w[0]
                )));
            }
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[PartitionRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Every uniform level must fit on the fine grid.
    pub fn check_grid(&self, grid: &TimeGrid) -> Result<(), ConvergenceError> {
        for rule in &self.rules {
            if let Some(n) = intervals(*rule) {
                if n > grid.n_steps() {
                    return Err(ConvergenceError::InvalidLadder(format!(
                        "{rule} needs {n} intervals but the grid has only {} steps",
                        grid.n_steps()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Interval count of deterministic rules.
pub fn intervals(rule: PartitionRule) -> Option<usize> {
    match rule {
        PartitionRule::Uniform(n) => Some(n),
        PartitionRule::Dyadic(k) => Some(1usize << k),
        PartitionRule::PriceTriggered(_) => None,
    }
}

/// Rebalancing indices of `rule` on one path.
///
/// Uniform levels use `floor(j N / n)`. The price-triggered rule rebalances
/// at the first index where some asset alive at the last rebalance has
/// moved by at least `delta` in relative terms; the terminal index is
/// always appended.
pub fn partition_indices(rule: PartitionRule, view: &PathView<'_>) -> Vec<usize> {
    let n_steps = view.n_steps();
    match intervals(rule) {
        Some(n) => {
            let n = n.min(n_steps);
            (0..=n).map(|j| j * n_steps / n).collect()
        }
        None => {
            let PartitionRule::PriceTriggered(delta) = rule else {
                unreachable!()
            };
            let mut out = vec![0];
            let mut anchor = 0;
            for k in 1..n_steps {
                let moved = view.row(anchor).iter().zip(view.row(k)).any(|(&a, &s)| {
                    a > 0.0 && (s / a - 1.0).abs() >= delta
                });
                if moved {
                    out.push(k);
                    anchor = k;
                }
            }
            out.push(n_steps);
            out
        }
    }
}

/// Partition of `ladder` level `level` for every path of `paths`.
pub fn build_partition(
    ladder: &PartitionLadder,
    level: usize,
    paths: &AssetPaths,
) -> Result<Partition, ConvergenceError> {
    let rule = *ladder
        .rules()
        .get(level)
        .ok_or(ConvergenceError::LevelOutOfRange { level, len: ladder.len() })?;
    ladder.check_grid(paths.grid())?;
    let n = paths.grid().n_steps();
    let partition = if intervals(rule).is_some() {
        Partition::shared(n, partition_indices(rule, &paths.path(0)))?
    } else {
        let rows = paths.paths().map(|v| partition_indices(rule, &v)).collect();
        Partition::per_path(n, rows)?
    };
    Ok(partition.with_rule(rule))
}

/// Largest gap between rebalancing times, in time units.
pub fn mesh(indices: &[usize], grid: &TimeGrid) -> f64 {
    max_gap(indices) as f64 * grid.dt()
}
