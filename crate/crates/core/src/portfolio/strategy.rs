//! Investment-fraction strategies.
//!
//! A strategy is evaluated at grid index `k` from the price history up to
//! and including `k`; the result is the fraction held over step `k -> k + 1`.
//! Coordinates of assets whose current price is zero are masked to zero.

use std::fmt;
use std::sync::Arc;

use super::{PortfolioError, SimplexVector};
use crate::market::{PathView, TimeGrid};

/// What a strategy may look at when choosing fractions at `step`.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub path: usize,
    pub step: usize,
    pub time: f64,
    pub horizon: f64,
    pub dim: usize,
    /// Price rows `0..=step`, row-major.
    pub prices: &'a [f64],
}

impl<'a> Observation<'a> {
    pub fn price(&self, k: usize, asset: usize) -> f64 {
        self.prices[k * self.dim + asset]
    }

    pub fn current(&self) -> &'a [f64] {
        &self.prices[self.step * self.dim..(self.step + 1) * self.dim]
    }
}

pub type FractionCallback = Arc<dyn Fn(&Observation<'_>) -> SimplexVector + Send + Sync>;

/// Simplex-valued fractions indexed by (path, step). A table with a single
/// path row is shared by every path.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionTable {
    dim: usize,
    n_steps: usize,
    n_paths: usize,
    values: Vec<f64>,
}

impl FractionTable {
    /// `rows[p][k]` is the fraction vector for path `p` at step `k < n_steps`.
    pub fn new(rows: Vec<Vec<SimplexVector>>) -> Result<Self, PortfolioError> {
        let n_paths = rows.len();
        let n_steps = rows.first().map_or(0, Vec::len);
        let dim = rows.first().and_then(|r| r.first()).map_or(0, SimplexVector::dim);
        if n_paths == 0 || n_steps == 0 || dim == 0 {
            return Err(PortfolioError::InvalidStrategy("empty fraction table".into()));
        }
        let mut values = Vec::with_capacity(n_paths * n_steps * dim);
        for row in rows {
            if row.len() != n_steps || row.iter().any(|v| v.dim() != dim) {
                return Err(PortfolioError::InvalidStrategy(
                    "fraction table rows must share shape".into(),
                ));
            }
            for v in row {
                values.extend_from_slice(v.as_slice());
            }
        }
        Ok(Self {
            dim,
            n_steps,
            n_paths,
            values,
        })
    }

    /// One row of fractions shared by all paths.
    pub fn shared(row: Vec<SimplexVector>) -> Result<Self, PortfolioError> {
        Self::new(vec![row])
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    fn row(&self, path: usize, step: usize) -> &[f64] {
        let p = if self.n_paths == 1 { 0 } else { path };
        let k = step.min(self.n_steps - 1);
        let start = (p * self.n_steps + k) * self.dim;
        &self.values[start..start + self.dim]
    }
}

#[derive(Clone)]
pub enum FractionRule {
    Constant(SimplexVector),
    Table(FractionTable),
    Callback(FractionCallback),
    /// `inner` sampled at the left endpoint of each coarse interval
    /// `[breakpoints[j], breakpoints[j + 1])`.
    Frozen {
        inner: Box<FractionStrategy>,
        breakpoints: Vec<usize>,
    },
}

impl fmt::Debug for FractionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FractionRule::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            FractionRule::Table(t) => f.debug_tuple("Table").field(t).finish(),
            FractionRule::Callback(_) => f.write_str("Callback(..)"),
            FractionRule::Frozen { inner, breakpoints } => f
                .debug_struct("Frozen")
                .field("inner", inner)
                .field("breakpoints", breakpoints)
                .finish(),
        }
    }
}

/// An adapted simplex-valued fraction process, optionally scaled by `1 - eps`.
#[derive(Debug, Clone)]
pub struct FractionStrategy {
    rule: FractionRule,
    dim: usize,
    scale: f64,
}

impl FractionStrategy {
    pub fn constant(fractions: SimplexVector) -> Self {
        let dim = fractions.dim();
        Self {
            rule: FractionRule::Constant(fractions),
            dim,
            scale: 1.0,
        }
    }

    pub fn table(table: FractionTable) -> Self {
        let dim = table.dim;
        Self {
            rule: FractionRule::Table(table),
            dim,
            scale: 1.0,
        }
    }

    pub fn callback<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&Observation<'_>) -> SimplexVector + Send + Sync + 'static,
    {
        Self {
            rule: FractionRule::Callback(Arc::new(f)),
            dim,
            scale: 1.0,
        }
    }

    /// Deterministic `min(t / T, cap)` in every listed asset weight.
    ///
    /// `weights` must lie in the simplex; the fraction of asset `i` at time
    /// `t` is `weights[i] * min(t / T, cap)`.
    pub fn ramp(weights: SimplexVector, cap: f64) -> Result<Self, PortfolioError> {
        if !(0.0..=1.0).contains(&cap) {
            return Err(PortfolioError::InvalidStrategy(format!(
                "ramp cap must lie in [0, 1], got {cap}"
            )));
        }
        let dim = weights.dim();
        Ok(Self::callback(dim, move |obs| {
            let level = (obs.time / obs.horizon).min(cap);
            weights.scaled(level)
        }))
    }

    /// The same strategy with every output multiplied by `1 - eps`.
    pub fn scaled(&self, eps: f64) -> Result<Self, PortfolioError> {
        if !(0.0..1.0).contains(&eps) {
            return Err(PortfolioError::InvalidStrategy(format!(
                "scaling epsilon must lie in [0, 1), got {eps}"
            )));
        }
        let mut out = self.clone();
        out.scale *= 1.0 - eps;
        Ok(out)
    }

    pub fn rule(&self) -> &FractionRule {
        &self.rule
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Checks that the strategy can be evaluated on paths of this shape.
    pub fn check_shape(&self, dim: usize, n_steps: usize, n_paths: usize) -> Result<(), PortfolioError> {
        if self.dim != dim {
            return Err(PortfolioError::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        match &self.rule {
            FractionRule::Table(t) => {
                if t.n_steps < n_steps {
                    return Err(PortfolioError::InvalidStrategy(format!(
                        "fraction table covers {} steps, grid has {n_steps}",
                        t.n_steps
                    )));
                }
                if t.n_paths != 1 && t.n_paths < n_paths {
                    return Err(PortfolioError::InvalidStrategy(format!(
                        "fraction table covers {} paths, ensemble has {n_paths}",
                        t.n_paths
                    )));
                }
                Ok(())
            }
            FractionRule::Frozen { inner, breakpoints } => {
                if breakpoints.last() != Some(&n_steps) {
                    return Err(PortfolioError::InvalidStrategy(
                        "frozen strategy was built for a different grid".into(),
                    ));
                }
                inner.check_shape(dim, n_steps, n_paths)
            }
            _ => Ok(()),
        }
    }

    /// Fractions for step `k -> k + 1` on `view`, written to `out`.
    pub fn fractions_into(&self, view: &PathView<'_>, k: usize, out: &mut [f64]) {
        self.raw_into(view, k, out);
        let row = view.row(k);
        for (o, &s) in out.iter_mut().zip(row) {
            if s == 0.0 {
                *o = 0.0;
            } else {
                *o *= self.scale;
            }
        }
    }

    pub fn fractions(&self, view: &PathView<'_>, k: usize) -> SimplexVector {
        let mut out = vec![0.0; self.dim];
        self.fractions_into(view, k, &mut out);
        SimplexVector::new(out).expect("strategy output stays in the simplex")
    }

    fn raw_into(&self, view: &PathView<'_>, k: usize, out: &mut [f64]) {
        match &self.rule {
            FractionRule::Constant(v) => out.copy_from_slice(v.as_slice()),
            FractionRule::Table(t) => out.copy_from_slice(t.row(view.index, k)),
            FractionRule::Callback(f) => {
                let obs = Observation {
                    path: view.index,
                    step: k,
                    time: view.grid.time(k),
                    horizon: view.grid.horizon(),
                    dim: view.dim,
                    prices: &view.prices[..(k + 1) * view.dim],
                };
                let v = f(&obs);
                assert_eq!(v.dim(), self.dim, "callback returned the wrong dimension");
                out.copy_from_slice(v.as_slice());
            }
            FractionRule::Frozen { inner, breakpoints } => {
                let j = breakpoints.partition_point(|&b| b <= k).saturating_sub(1);
                let left = breakpoints[j.min(breakpoints.len() - 2)];
                inner.fractions_into(view, left, out);
            }
        }
    }
}

/// Left endpoints of `m` uniform coarse intervals on an `n_steps` grid,
/// followed by `n_steps`.
pub fn coarse_breakpoints(n_steps: usize, m: usize) -> Vec<usize> {
    (0..=m).map(|j| j * n_steps / m).collect()
}

/// Freezes `strategy` to be constant on `m` uniform coarse intervals of
/// `grid`, taking its value at each interval's left endpoint.
pub fn freeze_strategy(
    strategy: &FractionStrategy,
    m: usize,
    grid: &TimeGrid,
) -> Result<FractionStrategy, PortfolioError> {
    let n = grid.n_steps();
    if m == 0 || m > n {
        return Err(PortfolioError::InvalidStrategy(format!(
            "coarse step count must lie in 1..={n}, got {m}"
        )));
    }
    let breakpoints = coarse_breakpoints(n, m);
    let rule = match &strategy.rule {
        FractionRule::Constant(_) => return Ok(strategy.clone()),
        FractionRule::Table(t) => {
            let mut values = t.values.clone();
            for p in 0..t.n_paths {
                for k in 0..t.n_steps {
                    let j = breakpoints.partition_point(|&b| b <= k).saturating_sub(1);
                    let left = breakpoints[j.min(m - 1)];
                    let src = (p * t.n_steps + left.min(t.n_steps - 1)) * t.dim;
                    let dst = (p * t.n_steps + k) * t.dim;
                    values.copy_within(src..src + t.dim, dst);
                }
            }
            FractionRule::Table(FractionTable { values, ..t.clone() })
        }
        _ => FractionRule::Frozen {
            inner: Box::new(FractionStrategy {
                scale: 1.0,
                ..strategy.clone()
            }),
            breakpoints,
        },
    };
    Ok(FractionStrategy {
        rule,
        dim: strategy.dim,
        scale: strategy.scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate, ModelSpec, PriceTable};

    fn flat_path(n: usize) -> (crate::market::AssetPaths, TimeGrid) {
        let table = PriceTable::uniform(1.0, vec![vec![1.0]; n + 1]).unwrap();
        let grid = table.grid();
        (simulate(&ModelSpec::Fixture(table), grid, 1, 0).unwrap(), grid)
    }

    #[test]
    fn ramp_frozen_at_two_intervals() {
        let (paths, grid) = flat_path(8);
        let ramp = FractionStrategy::ramp(SimplexVector::new(vec![1.0]).unwrap(), 0.9).unwrap();
        let frozen = freeze_strategy(&ramp, 2, &grid).unwrap();
        let view = paths.path(0);
        let vals: Vec<f64> = (0..8).map(|k| frozen.fractions(&view, k)[0]).collect();
        assert_eq!(vals, vec![0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn freezing_at_full_resolution_is_identity() {
        let (paths, grid) = flat_path(8);
        let ramp = FractionStrategy::ramp(SimplexVector::new(vec![1.0]).unwrap(), 0.9).unwrap();
        let frozen = freeze_strategy(&ramp, 8, &grid).unwrap();
        let view = paths.path(0);
        for k in 0..8 {
            assert_eq!(frozen.fractions(&view, k), ramp.fractions(&view, k));
        }
    }

    #[test]
    fn freezing_a_constant_is_a_fixed_point() {
        let (_, grid) = flat_path(8);
        let c = FractionStrategy::constant(SimplexVector::new(vec![0.3]).unwrap());
        let frozen = freeze_strategy(&c, 3, &grid).unwrap();
        assert!(matches!(frozen.rule(), FractionRule::Constant(v) if v[0] == 0.3));
        assert!(freeze_strategy(&c, 9, &grid).is_err());
    }

    #[test]
    fn frozen_table_uses_left_endpoints() {
        let (paths, grid) = flat_path(4);
        let row = (0..4).map(|k| SimplexVector::new(vec![0.1 * k as f64]).unwrap()).collect();
        let table = FractionStrategy::table(FractionTable::shared(row).unwrap());
        let frozen = freeze_strategy(&table, 2, &grid).unwrap();
        let view = paths.path(0);
        let vals: Vec<f64> = (0..4).map(|k| frozen.fractions(&view, k)[0]).collect();
        assert_eq!(vals, vec![0.0, 0.0, 0.2, 0.2]);
    }

    #[test]
    fn bankrupt_assets_are_masked() {
        let table = PriceTable::uniform(1.0, vec![vec![1.0, 1.0], vec![0.0, 2.0], vec![0.0, 3.0]]).unwrap();
        let grid = table.grid();
        let paths = simulate(&ModelSpec::Fixture(table), grid, 1, 0).unwrap();
        let s = FractionStrategy::constant(SimplexVector::new(vec![0.4, 0.4]).unwrap());
        let view = paths.path(0);
        assert_eq!(s.fractions(&view, 0).as_slice(), &[0.4, 0.4]);
        assert_eq!(s.fractions(&view, 1).as_slice(), &[0.0, 0.4]);
    }

    #[test]
    fn scaling() {
        let s = FractionStrategy::constant(SimplexVector::new(vec![0.5]).unwrap());
        let (paths, _) = flat_path(2);
        let scaled = s.scaled(0.1).unwrap();
        assert!((scaled.fractions(&paths.path(0), 0)[0] - 0.45).abs() < 1e-15);
        assert!(s.scaled(1.0).is_err());
        assert!(s.scaled(-0.1).is_err());
    }
}
