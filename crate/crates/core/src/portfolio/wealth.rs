use std::fmt;

use super::PortfolioError;
use crate::market::TimeGrid;

/// Which engine produced a set of wealth paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Fine-grid stochastic exponential of the fraction-weighted returns.
    Continuous,
    /// Units frozen between rebalancing dates, set from fractions.
    Multiplicative,
    /// Units chosen externally, no constraint enforcement.
    Additive,
    /// `eps + (1 - eps / x) X` of a constrained wealth.
    EpsilonShifted,
}

impl Engine {
    /// Engines whose output must be a no-short-sales wealth.
    pub fn is_constrained(self) -> bool {
        !matches!(self, Engine::Additive)
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Engine::Continuous => "continuous",
            Engine::Multiplicative => "multiplicative",
            Engine::Additive => "additive",
            Engine::EpsilonShifted => "epsilon-shifted",
        };
        f.write_str(name)
    }
}

/// Wealth per path per grid point, in baseline-asset units.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPaths {
    grid: TimeGrid,
    engine: Engine,
    n_paths: usize,
    values: Vec<f64>,
    bankruptcy: Vec<Option<usize>>,
}

impl WealthPaths {
    /// Wraps path-major values of length `n_paths * (N + 1)`.
    pub fn from_flat(grid: TimeGrid, engine: Engine, values: Vec<f64>) -> Result<Self, PortfolioError> {
        let len = grid.len();
        if values.is_empty() || values.len() % len != 0 {
            return Err(PortfolioError::GridMismatch(format!(
                "{} values do not fill whole paths of length {len}",
                values.len()
            )));
        }
        let n_paths = values.len() / len;
        let bankruptcy = values.chunks(len).map(first_zero).collect();
        Ok(Self {
            grid,
            engine,
            n_paths,
            values,
            bankruptcy,
        })
    }

    pub fn from_rows(grid: TimeGrid, engine: Engine, rows: Vec<Vec<f64>>) -> Result<Self, PortfolioError> {
        if rows.iter().any(|r| r.len() != grid.len()) {
            return Err(PortfolioError::GridMismatch(
                "every row must have one value per grid point".into(),
            ));
        }
        Self::from_flat(grid, engine, rows.concat())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[p * len..(p + 1) * len]
    }

    pub fn value(&self, p: usize, k: usize) -> f64 {
        self.values[p * self.grid.len() + k]
    }

    pub fn terminal(&self) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.value(p, self.grid.n_steps())).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// First index with zero wealth, per path, as recorded at construction.
    pub fn bankruptcy(&self) -> &[Option<usize>] {
        &self.bankruptcy
    }
}

/// First index where the path is exactly zero.
pub fn first_zero(path: &[f64]) -> Option<usize> {
    path.iter().position(|&v| v == 0.0)
}

/// First index where the path is strictly negative.
pub fn first_negative(path: &[f64]) -> Option<usize> {
    path.iter().position(|&v| v < 0.0)
}

/// First bankruptcy index per path.
///
/// For constrained engines the path must stay at zero after bankruptcy;
/// a revival is a hard error.
pub fn bankruptcy_index(wealth: &WealthPaths) -> Result<Vec<Option<usize>>, PortfolioError> {
    let mut out = Vec::with_capacity(wealth.n_paths());
    for p in 0..wealth.n_paths() {
        let path = wealth.path(p);
        let zeta = first_zero(path);
        if wealth.engine().is_constrained() {
            if let Some(z) = zeta {
                if let Some(k) = path[z..].iter().position(|&v| v != 0.0) {
                    return Err(PortfolioError::AbsorptionViolation {
                        path: p,
                        index: z + k,
                    });
                }
            }
            if let Some(k) = first_negative(path) {
                return Err(PortfolioError::NegativeWealth { path: p, index: k });
            }
        }
        out.push(zeta);
    }
    Ok(out)
}

/// `eps + (1 - eps / x) X`: a constrained wealth from `x` that never falls
/// below `eps`.
pub fn epsilon_shift(wealth: &WealthPaths, x: f64, eps: f64) -> Result<WealthPaths, PortfolioError> {
    if !(eps > 0.0 && eps < x) {
        return Err(PortfolioError::InvalidEpsilon { eps, x });
    }
    if !wealth.engine().is_constrained() {
        return Err(PortfolioError::Unconstrained(wealth.engine()));
    }
    if let Some(p) = (0..wealth.n_paths()).find(|&p| wealth.value(p, 0) != x) {
        return Err(PortfolioError::InitialWealthMismatch {
            path: p,
            found: wealth.value(p, 0),
            expected: x,
        });
    }
    let keep = 1.0 - eps / x;
    let values = wealth.values().iter().map(|&v| eps + keep * v).collect();
    WealthPaths::from_flat(*wealth.grid(), Engine::EpsilonShifted, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> TimeGrid {
        TimeGrid::new(1.0, 3).unwrap()
    }

    #[test]
    fn bankruptcy_detection() {
        let w = WealthPaths::from_rows(
            grid3(),
            Engine::Multiplicative,
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![1.0, 1.1, 0.9, 1.2]],
        )
        .unwrap();
        assert_eq!(bankruptcy_index(&w).unwrap(), vec![Some(1), None]);
    }

    #[test]
    fn revival_is_rejected_for_constrained_engines() {
        let rows = vec![vec![1.0, 0.0, 0.2, 0.0]];
        let w = WealthPaths::from_rows(grid3(), Engine::Multiplicative, rows.clone()).unwrap();
        assert_eq!(
            bankruptcy_index(&w),
            Err(PortfolioError::AbsorptionViolation { path: 0, index: 2 })
        );
        let additive = WealthPaths::from_rows(grid3(), Engine::Additive, rows).unwrap();
        assert_eq!(bankruptcy_index(&additive).unwrap(), vec![Some(1)]);
    }

    #[test]
    fn epsilon_shift_by_hand() {
        let w = WealthPaths::from_rows(
            grid3(),
            Engine::Multiplicative,
            vec![vec![1.0, 0.5, 0.0, 0.0], vec![1.0, 1.5, 2.0, 2.0], vec![1.0; 4]],
        )
        .unwrap();
        let s = epsilon_shift(&w, 1.0, 0.1).unwrap();
        assert!((s.value(0, 3) - 0.1).abs() < 1e-15);
        assert!((s.value(1, 3) - 1.9).abs() < 1e-15);
        assert!(s.path(2).iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(s.path(0).iter().all(|&v| v >= 0.1));
        assert!(epsilon_shift(&w, 1.0, 0.0).is_err());
        assert!(epsilon_shift(&w, 1.0, 1.0).is_err());
        assert!(epsilon_shift(&w, 2.0, 0.5).is_err());
    }
}
