//! Harness for the passage from terminal to uniform convergence of
//! nonnegative supermartingales started at 1.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::UtilityError;
use crate::convergence::{estimate_exceedance, Exceedance};
use crate::market::TimeGrid;
use crate::rng::path_rng;

/// Paths per deterministic reduction chunk.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub enum SupermartingaleFamily {
    /// `Z^k_t = exp(σ_k W_t - σ_k² t / 2)`.
    ExpMartingale { sigmas: Vec<f64> },
    /// `Z^k_t = exp(σ_k W_t - σ_k² t / 2 - δ_k t)` with `δ_k >= 0`.
    DriftedDown { sigmas: Vec<f64>, drifts: Vec<f64> },
    /// Supplied paths: `levels[k][path][grid index]`.
    Explicit(Vec<Vec<Vec<f64>>>),
}

impl SupermartingaleFamily {
    fn levels(&self) -> usize {
        match self {
            Self::ExpMartingale { sigmas } | Self::DriftedDown { sigmas, .. } => sigmas.len(),
            Self::Explicit(levels) => levels.len(),
        }
    }

    fn parameter(&self, k: usize) -> f64 {
        match self {
            Self::ExpMartingale { sigmas } | Self::DriftedDown { sigmas, .. } => sigmas[k],
            Self::Explicit(_) => f64::NAN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SupermartingaleConfig {
    pub family: SupermartingaleFamily,
    pub grid: TimeGrid,
    /// Ignored for explicit families.
    pub n_paths: usize,
    pub seed: u64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupermartingaleRow {
    pub level: usize,
    /// `σ_k` for simulated families.
    pub parameter: f64,
    /// `P[|Z^k_T - 1| > ε]`.
    pub terminal: Exceedance,
    /// `P[sup_t |Z^k_t - 1| > ε]`.
    pub sup: Exceedance,
    pub terminal_mean: f64,
    /// Sample means non-increasing in `t` within 3 standard errors.
    pub means_non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupermartingaleReport {
    pub rows: Vec<SupermartingaleRow>,
}

/// Per-chunk statistics of one level.
#[derive(Clone)]
struct Accumulator {
    terminal_dev: Vec<f64>,
    sup_dev: Vec<f64>,
    terminal: Vec<f64>,
    /// Sums and squared sums of the one-step increments `Z_{k+1} - Z_k`.
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl Accumulator {
    fn new(n_steps: usize) -> Self {
        Self {
            terminal_dev: Vec::new(),
            sup_dev: Vec::new(),
            terminal: Vec::new(),
            sum: vec![0.0; n_steps],
            sum_sq: vec![0.0; n_steps],
        }
    }

    fn push(&mut self, z: &[f64]) {
        let last = z[z.len() - 1];
        self.terminal.push(last);
        self.terminal_dev.push((last - 1.0).abs());
        self.sup_dev.push(z.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
        for (k, w) in z.windows(2).enumerate() {
            let dz = w[1] - w[0];
            self.sum[k] += dz;
            self.sum_sq[k] += dz * dz;
        }
    }

    fn append(&mut self, other: Accumulator) {
        self.terminal_dev.extend(other.terminal_dev);
        self.sup_dev.extend(other.sup_dev);
        self.terminal.extend(other.terminal);
        for k in 0..self.sum.len() {
            self.sum[k] += other.sum[k];
            self.sum_sq[k] += other.sum_sq[k];
        }
    }
}

fn validate(family: &SupermartingaleFamily, grid: &TimeGrid) -> Result<(), UtilityError> {
    let bad = |msg: String| Err(UtilityError::InvalidFamily(msg));
    if family.levels() == 0 {
        return bad("family has no levels".into());
    }
    match family {
        SupermartingaleFamily::ExpMartingale { sigmas } => {
            if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return bad("volatilities must be finite and nonnegative".into());
            }
        }
        SupermartingaleFamily::DriftedDown { sigmas, drifts } => {
            if drifts.len() != sigmas.len() {
                return bad("one drift per level is required".into());
            }
            if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return bad("volatilities must be finite and nonnegative".into());
            }
            if drifts.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return bad("downward drifts must be finite and nonnegative".into());
            }
        }
        SupermartingaleFamily::Explicit(levels) => {
            for (k, level) in levels.iter().enumerate() {
                if level.len() < 2 {
                    return bad(format!("level {k} needs at least two paths"));
                }
                for (p, z) in level.iter().enumerate() {
                    if z.len() != grid.len() {
                        return bad(format!(
                            "level {k} path {p} has {} points, grid has {}",
                            z.len(),
                            grid.len()
                        ));
                    }
                    if z[0] != 1.0 {
                        return bad(format!("level {k} path {p} starts at {} instead of 1", z[0]));
                    }
                    if let Some(i) = z.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
                        return bad(format!("level {k} path {p} is negative or non-finite at index {i}"));
                    }
                }
            }
        }
    }
    Ok(())
}

fn exp_path(sigma: f64, drift: f64, grid: &TimeGrid, w: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(w.iter().enumerate().map(|(k, &wk)| {
        let t = grid.time(k);
        (sigma * wk - 0.5 * sigma * sigma * t - drift * t).exp()
    }));
}

/// Terminal and uniform exceedance of `Z^k` around 1, level by level.
pub fn supermartingale_convergence_check(
    cfg: &SupermartingaleConfig,
) -> Result<SupermartingaleReport, UtilityError> {
    validate(&cfg.family, &cfg.grid)?;
    if !(cfg.epsilon > 0.0) {
        return Err(UtilityError::InvalidFamily(format!(
            "threshold must be positive, got {}",
            cfg.epsilon
        )));
    }
    let levels = cfg.family.levels();
    let grid = cfg.grid;
    let n = grid.n_steps();
    let n_paths = match &cfg.family {
        SupermartingaleFamily::Explicit(levels) => levels[0].len(),
        _ => cfg.n_paths,
    };
    if let SupermartingaleFamily::Explicit(ls) = &cfg.family {
        if ls.iter().any(|l| l.len() != n_paths) {
            return Err(UtilityError::InvalidFamily("levels differ in path count".into()));
        }
    }
    if n_paths < 2 {
        return Err(UtilityError::TooFewSamples(n_paths));
    }

    let chunks: Vec<Vec<Accumulator>> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Accumulator::new(n); levels];
            let mut w = vec![0.0; n + 1];
            let mut z = Vec::with_capacity(n + 1);
            let sqrt_dt = grid.dt().sqrt();
            for p in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                match &cfg.family {
                    SupermartingaleFamily::Explicit(ls) => {
                        for (k, a) in acc.iter_mut().enumerate() {
                            a.push(&ls[k][p]);
                        }
                    }
                    family => {
                        // One Brownian path shared by every level.
                        let mut rng = path_rng(cfg.seed, p as u64);
                        for k in 1..=n {
                            let step: f64 = StandardNormal.sample(&mut rng);
                            w[k] = w[k - 1] + sqrt_dt * step;
                        }
                        for (k, a) in acc.iter_mut().enumerate() {
                            let drift = match family {
                                SupermartingaleFamily::DriftedDown { drifts, .. } => drifts[k],
                                _ => 0.0,
                            };
                            exp_path(family.parameter(k), drift, &grid, &w, &mut z);
                            a.push(&z);
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut totals = vec![Accumulator::new(n); levels];
    for chunk in chunks {
        for (t, a) in totals.iter_mut().zip(chunk) {
            t.append(a);
        }
    }

    let count = n_paths as f64;
    let rows = totals
        .into_iter()
        .enumerate()
        .map(|(k, a)| {
            let means_non_increasing = (0..n).all(|i| {
                let m = a.sum[i] / count;
                let var = ((a.sum_sq[i] / count - m * m) * count / (count - 1.0)).max(0.0);
                m <= 3.0 * (var / count).sqrt() + 1e-15
            });
            Ok(SupermartingaleRow {
                level: k,
                parameter: cfg.family.parameter(k),
                terminal: estimate_exceedance(&a.terminal_dev, cfg.epsilon)?,
                sup: estimate_exceedance(&a.sup_dev, cfg.epsilon)?,
                terminal_mean: crate::stats::mean(&a.terminal),
                means_non_increasing,
            })
        })
        .collect::<Result<Vec<_>, UtilityError>>()?;
    Ok(SupermartingaleReport { rows })
}
