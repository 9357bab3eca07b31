//! The three wealth engines.
//!
//! * continuous: `X_{k+1} = X_k (1 + <pi_k, ΔR_{k+1}>)` on every fine step,
//! * multiplicative: on each partition interval `(a, b]` the fraction
//!   `pi_a` is converted to units at `a` and frozen, so
//!   `X_t = X_a (1 + sum_i pi^i_a (S^i_t - S^i_a) / S^i_a)` for `a < t <= b`,
//! * additive: externally supplied units, `X_t = x + sum theta (S_t - S_a)`,
//!   with no constraint enforcement.
//!
//! All engines produce a value at every fine-grid point. Per-path kernels
//! are exposed so experiments can stream paths without materialising
//! whole ensembles.

use rayon::prelude::*;

use super::{
    units_from_fractions, Engine, FractionStrategy, Partition, PortfolioError, SimplexVector,
    UnitInterval, UnitSchedule, WealthPaths,
};
use crate::market::{step_return, AssetPaths, PathView};

fn check_initial(x: f64) -> Result<(), PortfolioError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(PortfolioError::InvalidWealth(x));
    }
    Ok(())
}

/// `<pi, R_{a -> t}>` with the zero-ratio convention for dead assets.
#[inline]
fn weighted_return(fractions: &[f64], from: &[f64], to: &[f64]) -> f64 {
    fractions
        .iter()
        .zip(from.iter().zip(to))
        .map(|(&pi, (&a, &b))| if pi == 0.0 { 0.0 } else { pi * step_return(a, b) })
        .sum()
}

/// Continuous-trading wealth of one path, written to `out` (length `N + 1`).
pub fn continuous_path(x: f64, strategy: &FractionStrategy, view: &PathView<'_>, out: &mut Vec<f64>) {
    let n = view.n_steps();
    out.clear();
    out.reserve(n + 1);
    out.push(x);
    let mut pi = vec![0.0; view.dim];
    let mut wealth = x;
    for k in 0..n {
        if wealth != 0.0 {
            strategy.fractions_into(view, k, &mut pi);
            let y = weighted_return(&pi, view.row(k), view.row(k + 1));
            wealth = (wealth * (1.0 + y)).max(0.0);
        }
        out.push(wealth);
    }
}

/// Multiplicative buy-and-hold wealth of one path on rebalancing `indices`.
///
/// When `units` is given, the frozen holdings of each interval are appended.
pub fn multiplicative_path(
    x: f64,
    strategy: &FractionStrategy,
    indices: &[usize],
    view: &PathView<'_>,
    out: &mut Vec<f64>,
    mut units: Option<&mut Vec<UnitInterval>>,
) {
    let n = view.n_steps();
    out.clear();
    out.reserve(n + 1);
    out.push(x);
    let mut pi = vec![0.0; view.dim];
    for w in indices.windows(2) {
        let (a, b) = (w[0], w[1]);
        let base = out[a];
        if base == 0.0 {
            out.extend(std::iter::repeat_n(0.0, b - a));
            if let Some(u) = units.as_deref_mut() {
                u.push(UnitInterval { start: a, end: b, units: vec![0.0; view.dim] });
            }
            continue;
        }
        strategy.fractions_into(view, a, &mut pi);
        let from = view.row(a);
        for t in (a + 1)..=b {
            let factor = 1.0 + weighted_return(&pi, from, view.row(t));
            out.push((base * factor).max(0.0));
        }
        if let Some(u) = units.as_deref_mut() {
            let theta = pi
                .iter()
                .zip(from)
                .map(|(&p, &s)| if p == 0.0 { 0.0 } else { p * base / s })
                .collect();
            u.push(UnitInterval { start: a, end: b, units: theta });
        }
    }
}

/// Additive wealth `x + sum theta (S_t - S_a)` of one path.
pub fn additive_path(x: f64, intervals: &[UnitInterval], view: &PathView<'_>, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(view.n_steps() + 1);
    out.push(x);
    for iv in intervals {
        let base = out[iv.start];
        let from = view.row(iv.start);
        for t in (iv.start + 1)..=iv.end {
            let gain: f64 = iv
                .units
                .iter()
                .zip(from.iter().zip(view.row(t)))
                .map(|(&theta, (&a, &b))| theta * (b - a))
                .sum();
            out.push(base + gain);
        }
    }
}

fn check_strategy(strategy: &FractionStrategy, paths: &AssetPaths) -> Result<(), PortfolioError> {
    strategy.check_shape(paths.dim(), paths.grid().n_steps(), paths.n_paths())
}

fn check_partition(partition: &Partition, paths: &AssetPaths) -> Result<(), PortfolioError> {
    if partition.n_steps() != paths.grid().n_steps() {
        return Err(PortfolioError::GridMismatch(format!(
            "partition ends at {}, grid has {} steps",
            partition.n_steps(),
            paths.grid().n_steps()
        )));
    }
    if !partition.is_shared() && (0..paths.n_paths()).any(|p| partition.indices(p).is_empty()) {
        return Err(PortfolioError::InvalidPartition("missing path rows".into()));
    }
    Ok(())
}

pub fn wealth_continuous(
    x: f64,
    strategy: &FractionStrategy,
    paths: &AssetPaths,
) -> Result<WealthPaths, PortfolioError> {
    check_initial(x)?;
    check_strategy(strategy, paths)?;
    let rows: Vec<Vec<f64>> = (0..paths.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::new();
            continuous_path(x, strategy, &paths.path(p), &mut out);
            out
        })
        .collect();
    WealthPaths::from_rows(*paths.grid(), Engine::Continuous, rows)
}

pub fn wealth_multiplicative(
    x: f64,
    strategy: &FractionStrategy,
    partition: &Partition,
    paths: &AssetPaths,
) -> Result<WealthPaths, PortfolioError> {
    wealth_multiplicative_with_units(x, strategy, partition, paths).map(|(w, _)| w)
}

/// Multiplicative wealth together with the implied unit holdings.
pub fn wealth_multiplicative_with_units(
    x: f64,
    strategy: &FractionStrategy,
    partition: &Partition,
    paths: &AssetPaths,
) -> Result<(WealthPaths, UnitSchedule), PortfolioError> {
    check_initial(x)?;
    check_strategy(strategy, paths)?;
    check_partition(partition, paths)?;
    let results: Vec<(Vec<f64>, Vec<UnitInterval>)> = (0..paths.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::new();
            let mut units = Vec::new();
            multiplicative_path(x, strategy, partition.indices(p), &paths.path(p), &mut out, Some(&mut units));
            (out, units)
        })
        .collect();
    let (rows, schedules): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let wealth = WealthPaths::from_rows(*paths.grid(), Engine::Multiplicative, rows)?;
    let schedule = UnitSchedule::new(paths.dim(), paths.grid().n_steps(), true, schedules)?;
    Ok((wealth, schedule))
}

/// Additive wealth and, per path, the first index where it turned negative.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveWealth {
    pub wealth: WealthPaths,
    pub first_negative: Vec<Option<usize>>,
}

pub fn wealth_additive_units(
    x: f64,
    schedule: &UnitSchedule,
    paths: &AssetPaths,
) -> Result<AdditiveWealth, PortfolioError> {
    if !x.is_finite() {
        return Err(PortfolioError::InvalidWealth(x));
    }
    if schedule.n_steps() != paths.grid().n_steps()
        || schedule.n_paths() != paths.n_paths()
        || schedule.dim() != paths.dim()
    {
        return Err(PortfolioError::GridMismatch(
            "schedule does not match the price ensemble".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = (0..paths.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::new();
            additive_path(x, schedule.intervals(p), &paths.path(p), &mut out);
            out
        })
        .collect();
    let first_negative = rows.iter().map(|r| super::first_negative(r)).collect();
    let wealth = WealthPaths::from_rows(*paths.grid(), Engine::Additive, rows)?;
    Ok(AdditiveWealth {
        wealth,
        first_negative,
    })
}

/// Units that track a continuous-trading target additively: at each
/// rebalancing date `a`, `theta = pi_a X̂_a / S_a` where `X̂` is the
/// continuous wealth. The schedule is not constrained.
pub fn target_tracking_schedule(
    x: f64,
    strategy: &FractionStrategy,
    partition: &Partition,
    paths: &AssetPaths,
) -> Result<UnitSchedule, PortfolioError> {
    check_initial(x)?;
    check_strategy(strategy, paths)?;
    check_partition(partition, paths)?;
    let schedules: Vec<Vec<UnitInterval>> = (0..paths.n_paths())
        .into_par_iter()
        .map(|p| {
            let view = paths.path(p);
            let mut target = Vec::new();
            continuous_path(x, strategy, &view, &mut target);
            partition
                .indices(p)
                .windows(2)
                .map(|w| {
                    let pi: SimplexVector = strategy.fractions(&view, w[0]);
                    let units = units_from_fractions(&pi, view.row(w[0]), target[w[0]])?;
                    Ok(UnitInterval { start: w[0], end: w[1], units })
                })
                .collect::<Result<Vec<_>, PortfolioError>>()
        })
        .collect::<Result<_, _>>()?;
    UnitSchedule::new(paths.dim(), paths.grid().n_steps(), false, schedules)
}
