use std::fmt;

use super::PortfolioError;

/// How rebalancing dates are chosen on the fine grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionRule {
    /// `n` uniform intervals.
    Uniform(usize),
    /// `2^k` uniform intervals.
    Dyadic(u32),
    /// Rebalance as soon as some live asset has moved by at least `delta`
    /// relative to its price at the last rebalance.
    PriceTriggered(f64),
}

impl fmt::Display for PartitionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionRule::Uniform(n) => write!(f, "uniform({n})"),
            PartitionRule::Dyadic(k) => write!(f, "dyadic({k})"),
            PartitionRule::PriceTriggered(delta) => write!(f, "price({delta})"),
        }
    }
}

/// Rebalancing indices `0 = j_0 < j_1 < ... < j_n = N`, per path.
///
/// A partition with a single row is shared by every path.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    rule: Option<PartitionRule>,
    n_steps: usize,
    rows: Vec<Vec<usize>>,
}

pub(crate) fn check_indices(indices: &[usize], n_steps: usize) -> Result<(), PortfolioError> {
    if indices.first() != Some(&0) {
        return Err(PortfolioError::InvalidPartition("must start at index 0".into()));
    }
    if indices.last() != Some(&n_steps) || indices.len() < 2 {
        return Err(PortfolioError::InvalidPartition(format!(
            "must end at the terminal index {n_steps}"
        )));
    }
    if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
        return Err(PortfolioError::InvalidPartition(format!(
            "indices must be strictly increasing, found {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

impl Partition {
    pub fn shared(n_steps: usize, indices: Vec<usize>) -> Result<Self, PortfolioError> {
        check_indices(&indices, n_steps)?;
        Ok(Self {
            rule: None,
            n_steps,
            rows: vec![indices],
        })
    }

    pub fn per_path(n_steps: usize, rows: Vec<Vec<usize>>) -> Result<Self, PortfolioError> {
        if rows.is_empty() {
            return Err(PortfolioError::InvalidPartition("no paths".into()));
        }
        for row in &rows {
            check_indices(row, n_steps)?;
        }
        Ok(Self {
            rule: None,
            n_steps,
            rows,
        })
    }

    /// Every fine-grid index.
    pub fn fine(n_steps: usize) -> Self {
        Self {
            rule: Some(PartitionRule::Uniform(n_steps)),
            n_steps,
            rows: vec![(0..=n_steps).collect()],
        }
    }

    pub fn with_rule(mut self, rule: PartitionRule) -> Self {
        self.rule = Some(rule);
        self
    }

    pub fn rule(&self) -> Option<PartitionRule> {
        self.rule
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_shared(&self) -> bool {
        self.rows.len() == 1
    }

    pub fn indices(&self, path: usize) -> &[usize] {
        if self.rows.len() == 1 {
            &self.rows[0]
        } else {
            &self.rows[path]
        }
    }

    /// Largest gap, in steps, over all paths.
    pub fn max_gap(&self) -> usize {
        self.rows.iter().map(|r| max_gap(r)).max().unwrap_or(0)
    }
}

pub fn max_gap(indices: &[usize]) -> usize {
    indices.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
}
