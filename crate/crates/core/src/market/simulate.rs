use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{MarketError, ModelSpec, TimeGrid};
use crate::rng::path_rng;

/// Monte Carlo ensemble of price paths on a shared grid.
///
/// Values are stored path-major: index `(p * (N + 1) + k) * d + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPaths {
    grid: TimeGrid,
    dim: usize,
    n_paths: usize,
    values: Vec<f64>,
    jump_mark: Vec<bool>,
}

impl AssetPaths {
    /// Assembles an ensemble from individually simulated paths.
    pub fn from_paths(grid: TimeGrid, paths: Vec<SimulatedPath>) -> Result<Self, MarketError> {
        let dim = paths.first().map_or(0, |p| p.dim);
        let per_path = grid.len() * dim;
        if paths.is_empty() || paths.iter().any(|p| p.dim != dim || p.prices.len() != per_path) {
            return Err(MarketError::InvalidModel(
                "paths must be non-empty and share the grid shape".into(),
            ));
        }
        let n_paths = paths.len();
        let mut values = Vec::with_capacity(n_paths * per_path);
        let mut jump_mark = Vec::with_capacity(n_paths * per_path);
        for p in paths {
            values.extend_from_slice(&p.prices);
            jump_mark.extend_from_slice(&p.marks);
        }
        Ok(Self {
            grid,
            dim,
            n_paths,
            values,
            jump_mark,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn price(&self, path: usize, k: usize, asset: usize) -> f64 {
        self.values[(path * self.grid.len() + k) * self.dim + asset]
    }

    pub fn jump_mark(&self, path: usize, k: usize, asset: usize) -> bool {
        self.jump_mark[(path * self.grid.len() + k) * self.dim + asset]
    }

    pub fn path(&self, p: usize) -> PathView<'_> {
        let len = self.grid.len() * self.dim;
        PathView {
            index: p,
            dim: self.dim,
            grid: self.grid,
            prices: &self.values[p * len..(p + 1) * len],
            marks: &self.jump_mark[p * len..(p + 1) * len],
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = PathView<'_>> {
        (0..self.n_paths).map(move |p| self.path(p))
    }
}

/// Borrowed view of one path: prices and jump marks, row-major by grid index.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub index: usize,
    pub dim: usize,
    pub grid: TimeGrid,
    pub prices: &'a [f64],
    pub marks: &'a [bool],
}

impl<'a> PathView<'a> {
    pub fn price(&self, k: usize, asset: usize) -> f64 {
        self.prices[k * self.dim + asset]
    }

    pub fn row(&self, k: usize) -> &'a [f64] {
        &self.prices[k * self.dim..(k + 1) * self.dim]
    }

    pub fn jump_mark(&self, k: usize, asset: usize) -> bool {
        self.marks[k * self.dim + asset]
    }

    /// True when any asset jumped on step `k - 1 -> k`.
    pub fn any_jump(&self, k: usize) -> bool {
        self.marks[k * self.dim..(k + 1) * self.dim].iter().any(|&m| m)
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }
}

/// One simulated path, owned.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub dim: usize,
    pub prices: Vec<f64>,
    pub marks: Vec<bool>,
}

impl SimulatedPath {
    pub fn view(&self, index: usize, grid: TimeGrid) -> PathView<'_> {
        PathView {
            index,
            dim: self.dim,
            grid,
            prices: &self.prices,
            marks: &self.marks,
        }
    }
}

/// A validated model bound to a grid; generates paths on demand.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: ModelSpec,
    grid: TimeGrid,
    factor: Vec<f64>,
}

impl Simulator {
    pub fn new(model: &ModelSpec, grid: TimeGrid) -> Result<Self, MarketError> {
        let factor = model.validate(&grid)?;
        Ok(Self {
            model: model.clone(),
            grid,
            factor,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Path `index` of the ensemble seeded by `seed`.
    pub fn path(&self, seed: u64, index: usize) -> SimulatedPath {
        let d = self.model.dim();
        let n = self.grid.n_steps();
        let (diffusion, jumps) = match &self.model {
            ModelSpec::Fixture(table) => {
                return SimulatedPath {
                    dim: d,
                    prices: table.prices().to_vec(),
                    marks: table.marks().to_vec(),
                };
            }
            ModelSpec::BlackScholes(diffusion) => (diffusion, None),
            ModelSpec::MertonJumpDiffusion { diffusion, jumps } => (diffusion, Some(jumps)),
        };

        let mut rng = path_rng(seed, index as u64);
        let dt = self.grid.dt();
        let sqrt_dt = dt.sqrt();
        let drift: Vec<f64> = (0..d)
            .map(|i| (diffusion.drift[i] - 0.5 * diffusion.volatility[i].powi(2)) * dt)
            .collect();

        let mut prices = Vec::with_capacity((n + 1) * d);
        let mut marks = vec![false; (n + 1) * d];
        prices.extend_from_slice(&diffusion.initial);
        // Log prices relative to S_0; -inf once absorbed at zero.
        let mut log_level = vec![0.0f64; d];
        let mut z = vec![0.0f64; d];

        for k in 1..=n {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            for i in 0..d {
                let shock: f64 = (0..=i).map(|j| self.factor[i * d + j] * z[j]).sum();
                let mut step = drift[i] + diffusion.volatility[i] * sqrt_dt * shock;
                if let Some(jumps) = jumps {
                    let lambda = jumps.intensity[i];
                    if lambda > 0.0 {
                        let u: f64 = rng.random();
                        if u < lambda * dt {
                            let size = jumps.law[i].sample(&mut rng);
                            if log_level[i] > f64::NEG_INFINITY {
                                step += size.ln_1p();
                                marks[k * d + i] = true;
                            }
                        }
                    }
                }
                if log_level[i] > f64::NEG_INFINITY {
                    log_level[i] += step;
                }
                let s = if log_level[i] == f64::NEG_INFINITY {
                    0.0
                } else {
                    diffusion.initial[i] * log_level[i].exp()
                };
                prices.push(s);
            }
        }
        SimulatedPath {
            dim: d,
            prices,
            marks,
        }
    }
}

/// Simulates `n_paths` paths of `model` on `grid`.
///
/// Path `p` draws from its own stream of `seed`, so the ensemble is
/// bit-identical under any thread count.
pub fn simulate(
    model: &ModelSpec,
    grid: TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<AssetPaths, MarketError> {
    if n_paths == 0 {
        return Err(MarketError::InvalidModel("n_paths must be at least 1".into()));
    }
    let simulator = Simulator::new(model, grid)?;
    let paths: Vec<SimulatedPath> = (0..n_paths)
        .into_par_iter()
        .map(|p| simulator.path(seed, p))
        .collect();
    AssetPaths::from_paths(grid, paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{JumpLaw, PriceTable};

    #[test]
    fn deterministic_drift() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let model = ModelSpec::black_scholes_1d(0.05, 0.0, 100.0);
        let paths = simulate(&model, grid, 3, 1).unwrap();
        for p in 0..3 {
            let s_t = paths.price(p, 64, 0);
            assert!((s_t - 100.0 * 0.05f64.exp()).abs() < 1e-10);
            assert!((s_t - 105.127).abs() < 1e-3);
        }
    }

    #[test]
    fn identity_model_is_constant() {
        let grid = TimeGrid::new(2.0, 16).unwrap();
        let model = ModelSpec::black_scholes_1d(0.0, 0.0, 42.0);
        let paths = simulate(&model, grid, 2, 9).unwrap();
        assert!(paths.paths().all(|v| v.prices.iter().all(|&s| s == 42.0)));
    }

    #[test]
    fn ruin_jump_absorbs() {
        // A jump of -1 on the first step that fires kills the asset.
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let model = ModelSpec::merton_1d(0.05, 0.2, 1.0, 5.0, JumpLaw::Fixed(-1.0));
        let paths = simulate(&model, grid, 50, 3).unwrap();
        let mut ruined = 0;
        for view in paths.paths() {
            if let Some(k) = (0..=200).find(|&k| view.price(k, 0) == 0.0) {
                ruined += 1;
                assert!(view.jump_mark(k, 0));
                assert!((k..=200).all(|m| view.price(m, 0) == 0.0));
                assert!(((k + 1)..=200).all(|m| !view.jump_mark(m, 0)));
            }
        }
        assert!(ruined > 30);
    }

    #[test]
    fn fixture_with_ruin_step() {
        let table = PriceTable::uniform(1.0, vec![vec![10.0], vec![12.0], vec![0.0], vec![0.0]]).unwrap();
        let grid = table.grid();
        let paths = simulate(&ModelSpec::Fixture(table), grid, 2, 0).unwrap();
        let view = paths.path(1);
        assert_eq!(view.prices, &[10.0, 12.0, 0.0, 0.0]);
        assert_eq!(view.marks, &[false, false, true, false]);
    }

    #[test]
    fn zero_paths_is_an_error() {
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let model = ModelSpec::black_scholes_1d(0.0, 0.1, 1.0);
        assert!(simulate(&model, grid, 0, 0).is_err());
    }
}
