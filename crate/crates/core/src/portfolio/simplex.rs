use std::ops::Index;

use super::PortfolioError;

/// Slack allowed on `sum(z) <= 1` for accumulated rounding.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A point of the closed simplex `{z >= 0, sum(z) <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(values: Vec<f64>) -> Result<Self, PortfolioError> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(PortfolioError::NotInSimplex(format!(
                "coordinate {i} is {v}, must be finite and >= 0"
            )));
        }
        let total: f64 = values.iter().sum();
        if total > 1.0 + SIMPLEX_TOLERANCE {
            return Err(PortfolioError::NotInSimplex(format!(
                "coordinates sum to {total} > 1"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `factor * z` for `factor` in `[0, 1]`.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&factor));
        Self(self.0.iter().map(|v| v * factor).collect())
    }
}

impl Index<usize> for SimplexVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for SimplexVector {
    type Error = PortfolioError;

    fn try_from(values: Vec<f64>) -> Result<Self, PortfolioError> {
        Self::new(values)
    }
}
