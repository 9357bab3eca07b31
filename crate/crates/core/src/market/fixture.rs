//! Explicit price tables used as deterministic fixtures.
//!
//! The text form is a comma-separated table with header `t,S1,...,Sd` and
//! one row per grid point. Rows must sit on a uniform grid starting at 0.

use super::{MarketError, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    times: Vec<f64>,
    dim: usize,
    prices: Vec<f64>,
    marks: Vec<bool>,
}

impl PriceTable {
    /// Builds a table from explicit times and rows of prices.
    ///
    /// Jump marks default to the steps where a price falls from a positive
    /// value to zero, the only moves a continuous path cannot make.
    pub fn new(times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self, MarketError> {
        if rows.len() < 2 || rows.len() != times.len() {
            return Err(MarketError::InvalidFixture(format!(
                "need at least two rows with matching times, got {} rows and {} times",
                rows.len(),
                times.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(MarketError::InvalidFixture("no asset columns".into()));
        }
        let mut prices = Vec::with_capacity(rows.len() * dim);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MarketError::InvalidFixture(format!(
                    "row {k} has {} prices, expected {dim}",
                    row.len()
                )));
            }
            for &s in row {
                if !(s.is_finite() && s >= 0.0) {
                    return Err(MarketError::InvalidFixture(format!(
                        "row {k} has invalid price {s}"
                    )));
                }
            }
            prices.extend_from_slice(row);
        }
        if times[0] != 0.0 {
            return Err(MarketError::InvalidFixture("first time must be 0".into()));
        }
        let n = times.len() - 1;
        let horizon = times[n];
        for (k, &t) in times.iter().enumerate() {
            let expected = horizon * k as f64 / n as f64;
            if !(t.is_finite()) || (t - expected).abs() > 1e-9 * horizon.max(1.0) {
                return Err(MarketError::InvalidFixture(format!(
                    "time {t} at row {k} is not on a uniform grid"
                )));
            }
        }
        for i in 0..dim {
            if prices[i] <= 0.0 {
                return Err(MarketError::InvalidFixture(format!(
                    "initial price of asset {} must be positive",
                    i + 1
                )));
            }
            for k in 1..=n {
                if prices[(k - 1) * dim + i] == 0.0 && prices[k * dim + i] != 0.0 {
                    return Err(MarketError::AbsorptionViolation { asset: i, index: k });
                }
            }
        }
        let mut marks = vec![false; prices.len()];
        for k in 1..=n {
            for i in 0..dim {
                if prices[(k - 1) * dim + i] > 0.0 && prices[k * dim + i] == 0.0 {
                    marks[k * dim + i] = true;
                }
            }
        }
        Ok(Self {
            times,
            dim,
            prices,
            marks,
        })
    }

    /// Rows on the uniform grid of `[0, horizon]`.
    pub fn uniform(horizon: f64, rows: Vec<Vec<f64>>) -> Result<Self, MarketError> {
        let n = rows.len().saturating_sub(1).max(1);
        let times = (0..rows.len())
            .map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 })
            .collect();
        Self::new(times, rows)
    }

    /// Overrides the jump marks, one flag per (row, asset).
    pub fn with_marks(mut self, marks: Vec<Vec<bool>>) -> Result<Self, MarketError> {
        if marks.len() != self.times.len() || marks.iter().any(|r| r.len() != self.dim) {
            return Err(MarketError::InvalidFixture(
                "jump marks must match the price table shape".into(),
            ));
        }
        self.marks = marks.into_iter().flatten().collect();
        Ok(self)
    }

    pub fn parse(text: &str) -> Result<Self, MarketError> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| MarketError::InvalidFixture("empty fixture".into()))?;
        let columns: Vec<&str> = header.split(',').map(str::trim).collect();
        if columns.len() < 2 || columns[0] != "t" {
            return Err(MarketError::InvalidFixture(format!(
                "header must be `t,S1,...,Sd`, got `{header}`"
            )));
        }
        for (i, c) in columns[1..].iter().enumerate() {
            if *c != format!("S{}", i + 1) {
                return Err(MarketError::InvalidFixture(format!(
                    "header column {} must be `S{}`, got `{c}`",
                    i + 2,
                    i + 1
                )));
            }
        }
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for (line_no, line) in lines {
            let values = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| {
                    MarketError::InvalidFixture(format!("line {}: {e}", line_no + 1))
                })?;
            if values.len() != columns.len() {
                return Err(MarketError::InvalidFixture(format!(
                    "line {}: expected {} values, found {}",
                    line_no + 1,
                    columns.len(),
                    values.len()
                )));
            }
            times.push(values[0]);
            rows.push(values[1..].to_vec());
        }
        Self::new(times, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon(), self.n_steps()).expect("fixture grid is validated")
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn marks(&self) -> &[bool] {
        &self.marks
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<(), MarketError> {
        if grid.n_steps() != self.n_steps()
            || (grid.horizon() - self.horizon()).abs() > 1e-12 * grid.horizon()
        {
            return Err(MarketError::InvalidFixture(format!(
                "fixture has {} steps over {}, grid has {} steps over {}",
                self.n_steps(),
                self.horizon(),
                grid.n_steps(),
                grid.horizon()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_table() {
        let table = PriceTable::parse("t,S1,S2\n0,100,50\n0.5,110,0\n1,99,0\n").unwrap();
        assert_eq!(table.dim(), 2);
        assert_eq!(table.n_steps(), 2);
        assert_eq!(table.prices(), &[100.0, 50.0, 110.0, 0.0, 99.0, 0.0]);
        assert_eq!(table.marks(), &[false, false, false, true, false, false]);
    }

    #[test]
    fn rejects_bad_headers_and_revivals() {
        assert!(PriceTable::parse("time,S1\n0,1\n1,2\n").is_err());
        assert!(PriceTable::parse("t,S2\n0,1\n1,2\n").is_err());
        let revived = PriceTable::parse("t,S1\n0,1\n0.5,0\n1,2\n");
        assert!(matches!(revived, Err(MarketError::AbsorptionViolation { .. })));
        assert!(PriceTable::parse("t,S1\n0,1\n0.3,2\n1,2\n").is_err());
        assert!(PriceTable::parse("t,S1\n0,-1\n1,2\n").is_err());
    }
}
