use super::{AssetPaths, PathView, TimeGrid};

/// Simple return `(next - prev) / prev`, taken as zero once `prev` is zero.
#[inline]
pub fn step_return(prev: f64, next: f64) -> f64 {
    if prev == 0.0 {
        0.0
    } else {
        (next - prev) / prev
    }
}

/// Return increments `ΔR^i_k` for `k = 1..=N`, with the jump marks of the
/// step that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnIncrements {
    grid: TimeGrid,
    dim: usize,
    n_paths: usize,
    increments: Vec<f64>,
    marks: Vec<bool>,
}

impl ReturnIncrements {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn offset(&self, path: usize, k: usize, asset: usize) -> usize {
        assert!(k >= 1 && k <= self.grid.n_steps(), "increment index {k} out of 1..=N");
        (path * self.grid.n_steps() + k - 1) * self.dim + asset
    }

    /// Increment over step `k - 1 -> k`, `k` in `1..=N`.
    pub fn get(&self, path: usize, k: usize, asset: usize) -> f64 {
        self.increments[self.offset(path, k, asset)]
    }

    pub fn jump_mark(&self, path: usize, k: usize, asset: usize) -> bool {
        self.marks[self.offset(path, k, asset)]
    }

    /// All increments of one path, row `k - 1` holding step `k`.
    pub fn path(&self, path: usize) -> &[f64] {
        let len = self.grid.n_steps() * self.dim;
        &self.increments[path * len..(path + 1) * len]
    }
}

pub fn path_returns(view: &PathView<'_>) -> Vec<f64> {
    let d = view.dim;
    let n = view.n_steps();
    let mut out = Vec::with_capacity(n * d);
    for k in 1..=n {
        for i in 0..d {
            out.push(step_return(view.price(k - 1, i), view.price(k, i)));
        }
    }
    out
}

pub fn returns_from_prices(paths: &AssetPaths) -> ReturnIncrements {
    let d = paths.dim();
    let n = paths.grid().n_steps();
    let mut increments = Vec::with_capacity(paths.n_paths() * n * d);
    let mut marks = Vec::with_capacity(paths.n_paths() * n * d);
    for view in paths.paths() {
        increments.extend(path_returns(&view));
        marks.extend_from_slice(&view.marks[d..]);
    }
    ReturnIncrements {
        grid: *paths.grid(),
        dim: d,
        n_paths: paths.n_paths(),
        increments,
        marks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate, ModelSpec, PriceTable};

    fn single(rows: &[f64]) -> AssetPaths {
        let table = PriceTable::uniform(1.0, rows.iter().map(|&s| vec![s]).collect()).unwrap();
        let grid = table.grid();
        simulate(&ModelSpec::Fixture(table), grid, 1, 0).unwrap()
    }

    #[test]
    fn hand_computed_returns() {
        let r = returns_from_prices(&single(&[100.0, 110.0, 99.0]));
        assert!((r.get(0, 1, 0) - 0.10).abs() < 1e-15);
        assert!((r.get(0, 2, 0) + 0.10).abs() < 1e-15);
    }

    #[test]
    fn zero_convention_after_ruin() {
        let r = returns_from_prices(&single(&[100.0, 0.0, 0.0]));
        assert_eq!(r.path(0), &[-1.0, 0.0]);
        assert!(r.jump_mark(0, 1, 0));
        assert!(!r.jump_mark(0, 2, 0));
    }

    #[test]
    fn constant_prices_have_zero_returns() {
        let r = returns_from_prices(&single(&[5.0, 5.0, 5.0, 5.0]));
        assert!(r.path(0).iter().all(|&x| x == 0.0));
    }
}
