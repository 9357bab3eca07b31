//! Unit holdings, the fraction/unit correspondence and the no-short-sales
//! checker.

use super::{PortfolioError, SimplexVector, WealthPaths, SIMPLEX_TOLERANCE};
use crate::market::AssetPaths;

/// Relative slack used when comparing position cost with wealth.
pub const COST_TOLERANCE: f64 = 1e-12;

/// `theta^i = pi^i X_- / S^i_-`.
pub fn units_from_fractions(
    fractions: &SimplexVector,
    prices: &[f64],
    wealth: f64,
) -> Result<Vec<f64>, PortfolioError> {
    if fractions.dim() != prices.len() {
        return Err(PortfolioError::DimensionMismatch {
            expected: prices.len(),
            found: fractions.dim(),
        });
    }
    if !(wealth >= 0.0) {
        return Err(PortfolioError::InvalidWealth(wealth));
    }
    fractions
        .as_slice()
        .iter()
        .zip(prices)
        .enumerate()
        .map(|(i, (&pi, &s))| {
            if pi == 0.0 {
                Ok(0.0)
            } else if s == 0.0 {
                Err(PortfolioError::BankruptAsset { asset: i })
            } else {
                Ok(pi * wealth / s)
            }
        })
        .collect()
}

/// `pi^i = theta^i S^i_- / X_-`, rejecting holdings that break the
/// no-short-sales constraint instead of clipping them.
pub fn fractions_from_units(
    units: &[f64],
    prices: &[f64],
    wealth: f64,
) -> Result<SimplexVector, PortfolioError> {
    if units.len() != prices.len() {
        return Err(PortfolioError::DimensionMismatch {
            expected: prices.len(),
            found: units.len(),
        });
    }
    if !(wealth > 0.0) {
        return Err(PortfolioError::InvalidWealth(wealth));
    }
    if let Some((asset, &theta)) = units.iter().enumerate().find(|(_, t)| **t < 0.0) {
        return Err(PortfolioError::ConstraintViolation(ViolationKind::NegativeUnits, format!(
            "asset {asset} holds {theta} units"
        )));
    }
    let cost: f64 = units.iter().zip(prices).map(|(t, s)| t * s).sum();
    if cost > wealth * (1.0 + SIMPLEX_TOLERANCE) {
        return Err(PortfolioError::ConstraintViolation(ViolationKind::BaselineShort, format!(
            "position cost {cost} exceeds wealth {wealth}"
        )));
    }
    let fractions = units.iter().zip(prices).map(|(t, s)| t * s / wealth).collect();
    SimplexVector::new(fractions)
}

/// Units held over fine steps `start..end` (grid indices `start -> end`).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitInterval {
    pub start: usize,
    pub end: usize,
    pub units: Vec<f64>,
}

/// Piecewise-constant unit holdings, one list of contiguous intervals per path.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSchedule {
    dim: usize,
    n_steps: usize,
    no_short_sales: bool,
    paths: Vec<Vec<UnitInterval>>,
}

impl UnitSchedule {
    /// Validates contiguity from 0 to `n_steps`. When `no_short_sales` is
    /// set, negative units are rejected up front.
    pub fn new(
        dim: usize,
        n_steps: usize,
        no_short_sales: bool,
        paths: Vec<Vec<UnitInterval>>,
    ) -> Result<Self, PortfolioError> {
        for (p, intervals) in paths.iter().enumerate() {
            let mut at = 0;
            for iv in intervals {
                if iv.start != at || iv.end <= iv.start || iv.units.len() != dim {
                    return Err(PortfolioError::InvalidSchedule(format!(
                        "path {p}: interval {}..{} breaks contiguity or shape",
                        iv.start, iv.end
                    )));
                }
                if no_short_sales && iv.units.iter().any(|&t| t < 0.0) {
                    return Err(PortfolioError::InvalidSchedule(format!(
                        "path {p}: negative units in a no-short-sales schedule at {}",
                        iv.start
                    )));
                }
                at = iv.end;
            }
            if at != n_steps {
                return Err(PortfolioError::InvalidSchedule(format!(
                    "path {p}: schedule ends at {at}, expected {n_steps}"
                )));
            }
        }
        Ok(Self {
            dim,
            n_steps,
            no_short_sales,
            paths,
        })
    }

    /// Holds the same units on `intervals` for every one of `n_paths` paths.
    pub fn shared(
        dim: usize,
        n_steps: usize,
        n_paths: usize,
        intervals: Vec<UnitInterval>,
    ) -> Result<Self, PortfolioError> {
        Self::new(dim, n_steps, false, vec![intervals; n_paths])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn is_no_short_sales(&self) -> bool {
        self.no_short_sales
    }

    pub fn intervals(&self, path: usize) -> &[UnitInterval] {
        &self.paths[path]
    }

    /// Units held over step `k -> k + 1`.
    pub fn units_at(&self, path: usize, k: usize) -> &[f64] {
        let ivs = &self.paths[path];
        let j = ivs.partition_point(|iv| iv.end <= k);
        &ivs[j].units
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Some `theta^i < 0`.
    NegativeUnits,
    /// `sum theta^i S^i_- > X_-`: the baseline asset is shorted.
    BaselineShort,
}

impl std::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ViolationKind::NegativeUnits => "negative-units",
            ViolationKind::BaselineShort => "baseline-short",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub path: usize,
    /// Grid index of the left end of the offending step.
    pub index: usize,
    pub kind: ViolationKind,
}

/// Checks the no-short-sales constraint on every fine step: units are
/// nonnegative and the position cost at the left end of the step does not
/// exceed wealth there. Empty output means the constraint holds everywhere.
pub fn check_no_short_sales(
    schedule: &UnitSchedule,
    paths: &AssetPaths,
    wealth: &WealthPaths,
) -> Result<Vec<Violation>, PortfolioError> {
    let n = schedule.n_steps();
    if paths.grid().n_steps() != n || wealth.grid().n_steps() != n {
        return Err(PortfolioError::GridMismatch(
            "schedule, prices and wealth must share the grid".into(),
        ));
    }
    if paths.n_paths() != schedule.n_paths() || wealth.n_paths() != schedule.n_paths() {
        return Err(PortfolioError::GridMismatch(
            "schedule, prices and wealth must cover the same paths".into(),
        ));
    }
    let mut report = Vec::new();
    for p in 0..schedule.n_paths() {
        let view = paths.path(p);
        for iv in schedule.intervals(p) {
            if iv.units.iter().any(|&t| t < 0.0) {
                report.push(Violation {
                    path: p,
                    index: iv.start,
                    kind: ViolationKind::NegativeUnits,
                });
            }
            for k in iv.start..iv.end {
                let cost: f64 = iv.units.iter().zip(view.row(k)).map(|(t, s)| t * s).sum();
                let x = wealth.value(p, k);
                if cost > x + COST_TOLERANCE * x.abs().max(cost.abs()).max(1.0) {
                    report.push(Violation {
                        path: p,
                        index: k,
                        kind: ViolationKind::BaselineShort,
                    });
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(v: &[f64]) -> SimplexVector {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn units_by_hand() {
        assert_eq!(units_from_fractions(&simplex(&[0.5]), &[50.0], 200.0).unwrap(), vec![2.0]);
        assert_eq!(units_from_fractions(&simplex(&[0.0]), &[0.0], 200.0).unwrap(), vec![0.0]);
        assert_eq!(
            units_from_fractions(&simplex(&[0.3]), &[0.0], 1.0),
            Err(PortfolioError::BankruptAsset { asset: 0 })
        );
    }

    #[test]
    fn fractions_by_hand() {
        assert_eq!(fractions_from_units(&[2.0], &[50.0], 200.0).unwrap(), simplex(&[0.5]));
        assert_eq!(fractions_from_units(&[0.0], &[50.0], 200.0).unwrap(), simplex(&[0.0]));
        let err = fractions_from_units(&[5.0], &[50.0], 200.0).unwrap_err();
        assert!(matches!(
            err,
            PortfolioError::ConstraintViolation(ViolationKind::BaselineShort, ref msg) if msg.contains("250")
        ));
        assert!(matches!(
            fractions_from_units(&[-0.1], &[50.0], 200.0),
            Err(PortfolioError::ConstraintViolation(ViolationKind::NegativeUnits, _))
        ));
        assert!(fractions_from_units(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn schedule_lookup_and_validation() {
        let ivs = vec![
            UnitInterval { start: 0, end: 2, units: vec![1.0] },
            UnitInterval { start: 2, end: 3, units: vec![2.0] },
        ];
        let s = UnitSchedule::shared(1, 3, 2, ivs.clone()).unwrap();
        assert_eq!(s.units_at(1, 0), &[1.0]);
        assert_eq!(s.units_at(1, 1), &[1.0]);
        assert_eq!(s.units_at(1, 2), &[2.0]);
        assert!(UnitSchedule::shared(1, 4, 1, ivs.clone()).is_err());
        let gap = vec![UnitInterval { start: 0, end: 1, units: vec![1.0] }, ivs[1].clone()];
        assert!(UnitSchedule::shared(1, 3, 1, gap).is_err());
        let neg = vec![UnitInterval { start: 0, end: 3, units: vec![-1.0] }];
        assert!(UnitSchedule::new(1, 3, true, vec![neg]).is_err());
    }
}
