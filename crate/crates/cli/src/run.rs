//! Experiment execution and artifact emission.
//!
//! Every CSV is assembled in memory first and written by one thread, so
//! the bytes depend only on the configuration and the seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use multapprox_core::convergence::{
    run_freeze_convergence, run_multiplicative_convergence, run_residual_experiment,
    ApproximationConfig, ConvergenceError, ResidualConfig,
};
use multapprox_core::market::{simulate, MarketError, ModelSpec};
use multapprox_core::portfolio::{
    check_no_short_sales, target_tracking_schedule, wealth_additive_units, wealth_continuous,
    wealth_multiplicative_with_units, Partition, PortfolioError, Violation,
};
use multapprox_core::report;
use multapprox_core::utility::{
    run_indirect_utility_gap, run_terminal_convergence, run_uniform_convergence,
    supermartingale_convergence_check, SupermartingaleConfig, UtilityConfig, UtilityError,
};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::manifest::{Manifest, RunStatus, MANIFEST_FILE};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Convergence(#[from] ConvergenceError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("{0}")]
    Incomplete(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// In-memory results of one experiment.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    /// `(file name, contents)` in emission order.
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
    /// Extra facts recorded in the manifest, e.g. optimiser output.
    pub details: serde_json::Map<String, serde_json::Value>,
}

/// File names each kind emits.
pub fn output_files(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Converge => &["convergence.csv"],
        ExperimentKind::Freeze => &["freeze.csv"],
        ExperimentKind::Residual => &["residual.csv"],
        ExperimentKind::UtilityGap | ExperimentKind::Uniform => &["utility.csv"],
        ExperimentKind::Terminal => &["utility.csv", "terminal_km.csv"],
        ExperimentKind::Supermart => &["supermart.csv"],
        ExperimentKind::DemoNegative => &["demo_negative.csv"],
    }
}

fn missing(what: &str) -> RunError {
    RunError::Incomplete(format!("configuration has no {what}"))
}

fn model(cfg: &ExperimentConfig) -> Result<&ModelSpec, RunError> {
    cfg.model.as_ref().ok_or_else(|| missing("model"))
}

fn approximation(cfg: &ExperimentConfig) -> Result<ApproximationConfig, RunError> {
    Ok(ApproximationConfig {
        model: model(cfg)?.clone(),
        grid: cfg.grid,
        strategy: cfg.strategy.as_ref().ok_or_else(|| missing("strategy"))?.build(),
        x: cfg.wealth,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        relative_epsilons: cfg.epsilons.clone(),
        record_timing: cfg.record_timing,
    })
}

fn bankrupt_warning(out: &mut Artifacts, n: usize) {
    if n > 0 {
        out.warnings
            .push(format!("{n} paths with continuous wealth absorbed at zero"));
    }
    out.details.insert("bankrupt_paths".into(), n.into());
}

/// Runs the experiment without touching the file system.
pub fn compute(cfg: &ExperimentConfig) -> Result<Artifacts, RunError> {
    let mut out = Artifacts::default();
    let names = output_files(cfg.kind);
    match cfg.kind {
        ExperimentKind::Converge => {
            let ladder = cfg.ladder.as_ref().ok_or_else(|| missing("partition ladder"))?;
            let r = run_multiplicative_convergence(&approximation(cfg)?, ladder)?;
            bankrupt_warning(&mut out, r.bankrupt_paths);
            out.files.push((names[0].into(), report::convergence_csv(&r)));
        }
        ExperimentKind::Freeze => {
            let r = run_freeze_convergence(&approximation(cfg)?, &cfg.coarse_steps)?;
            bankrupt_warning(&mut out, r.bankrupt_paths);
            out.files.push((names[0].into(), report::convergence_csv(&r)));
        }
        ExperimentKind::Residual => {
            let r = run_residual_experiment(&ResidualConfig {
                model: model(cfg)?.clone(),
                horizon: cfg.grid.horizon(),
                fine_steps: cfg.fine_steps.clone(),
                strategy: cfg.strategy.as_ref().ok_or_else(|| missing("strategy"))?.build(),
                scale_eps: cfg.scale_eps,
                partition: cfg.residual_partition,
                x: cfg.wealth,
                n_paths: cfg.n_paths,
                seed: cfg.seed,
            })?;
            out.files.push((names[0].into(), report::residual_csv(&r)));
        }
        ExperimentKind::UtilityGap | ExperimentKind::Terminal | ExperimentKind::Uniform => {
            let ucfg = UtilityConfig {
                model: model(cfg)?.clone(),
                grid: cfg.grid,
                utility: cfg.utility.clone(),
                x: cfg.wealth,
                ladder: cfg.ladder.clone().ok_or_else(|| missing("partition ladder"))?,
                n_paths: cfg.n_paths,
                seed: cfg.seed,
                epsilon: cfg.epsilon,
                fractions: cfg.fractions.clone(),
                shift: cfg.shift,
            };
            let r = match cfg.kind {
                ExperimentKind::UtilityGap => run_indirect_utility_gap(&ucfg)?,
                ExperimentKind::Terminal => run_terminal_convergence(&ucfg)?,
                _ => run_uniform_convergence(&ucfg)?,
            };
            out.details
                .insert("fractions".into(), r.fractions.as_slice().to_vec().into());
            if r.growth_rate.is_finite() {
                out.details.insert("growth_rate".into(), r.growth_rate.into());
            }
            if r.weight_sum.is_finite() {
                out.details.insert("weight_sum".into(), r.weight_sum.into());
            }
            if !r.simple_below_reference() {
                out.warnings
                    .push("simple-strategy utility exceeds the reference beyond noise".into());
            }
            out.files.push((names[0].into(), report::utility_csv(&r)));
            if cfg.kind == ExperimentKind::Terminal {
                out.files.push((names[1].into(), report::km_csv(&r)));
            }
        }
        ExperimentKind::Supermart => {
            let r = supermartingale_convergence_check(&SupermartingaleConfig {
                family: cfg.family.clone().ok_or_else(|| missing("family"))?,
                grid: cfg.grid,
                n_paths: cfg.n_paths,
                seed: cfg.seed,
                epsilon: cfg.epsilon,
            })?;
            if r.rows.iter().any(|row| !row.means_non_increasing) {
                out.warnings
                    .push("sample means increase beyond three standard errors".into());
            }
            out.files.push((names[0].into(), report::supermart_csv(&r)));
        }
        ExperimentKind::DemoNegative => {
            let (csv, violations) = demo_negative(cfg)?;
            out.details.insert("violations".into(), violations.into());
            out.files.push((names[0].into(), csv));
        }
    }
    Ok(out)
}

/// Header of `demo_negative.csv` for `d` assets.
pub fn demo_header(d: usize) -> String {
    let mut h = String::from("k,t");
    for i in 1..=d {
        let _ = write!(h, ",S{i}");
    }
    h.push_str(",continuous,multiplicative,additive");
    for i in 1..=d {
        let _ = write!(h, ",theta_mult{i}");
    }
    for i in 1..=d {
        let _ = write!(h, ",theta_add{i}");
    }
    h.push_str(",violation");
    h
}

fn violation_cells(cells: &mut [Vec<String>], engine: &str, found: &[Violation]) {
    for v in found {
        cells[v.index].push(format!("{engine}:{}", v.kind));
    }
}

/// Continuous, multiplicative and additive target-tracking wealth on one
/// fixture path, with the no-short-sales verdict per step.
fn demo_negative(cfg: &ExperimentConfig) -> Result<(String, Vec<String>), RunError> {
    let model = model(cfg)?;
    let strategy = cfg.strategy.as_ref().ok_or_else(|| missing("strategy"))?.build();
    let paths = simulate(model, cfg.grid, 1, cfg.seed)?;
    let n = cfg.grid.n_steps();
    let d = paths.dim();
    // Rebalancing dates exclude the horizon, which closes the last interval.
    let mut indices = cfg.rebalance.clone();
    if indices.last() != Some(&n) {
        indices.push(n);
    }
    let partition = Partition::shared(n, indices)?;
    let x = cfg.wealth;

    let continuous = wealth_continuous(x, &strategy, &paths)?;
    let (mult, mult_units) = wealth_multiplicative_with_units(x, &strategy, &partition, &paths)?;
    let schedule = target_tracking_schedule(x, &strategy, &partition, &paths)?;
    let additive = wealth_additive_units(x, &schedule, &paths)?;

    let mut cells = vec![Vec::new(); n + 1];
    let mult_v = check_no_short_sales(&mult_units, &paths, &mult)?;
    let add_v = check_no_short_sales(&schedule, &paths, &additive.wealth)?;
    violation_cells(&mut cells, "multiplicative", &mult_v);
    violation_cells(&mut cells, "additive", &add_v);

    let mut csv = demo_header(d);
    csv.push('\n');
    for k in 0..=n {
        let _ = write!(csv, "{},{}", k, cfg.grid.time(k));
        for i in 0..d {
            let _ = write!(csv, ",{}", paths.price(0, k, i));
        }
        let _ = write!(
            csv,
            ",{},{},{}",
            continuous.value(0, k),
            mult.value(0, k),
            additive.wealth.value(0, k)
        );
        // Holdings over the step starting at k; the terminal row has none.
        for units in [&mult_units, &schedule] {
            for i in 0..d {
                if k < n {
                    let _ = write!(csv, ",{}", units.units_at(0, k)[i]);
                } else {
                    csv.push(',');
                }
            }
        }
        let _ = writeln!(csv, ",{}", cells[k].join(";"));
    }
    let summary = add_v
        .iter()
        .map(|v| format!("additive:{}@{}", v.kind, v.index))
        .chain(mult_v.iter().map(|v| format!("multiplicative:{}@{}", v.kind, v.index)))
        .collect();
    Ok((csv, summary))
}

/// Outcome of [`execute`].
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs `cfg` into `out_root/<cfg.output>`.
///
/// The manifest is written with status `running` before any work and
/// finalised afterwards. On failure every CSV of the run is removed and the
/// manifest records the error.
pub fn execute(
    cfg: &ExperimentConfig,
    config_text: &str,
    out_root: &Path,
) -> Result<RunOutcome, RunError> {
    let dir = out_root.join(&cfg.output);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut manifest = Manifest::new(cfg, config_text);
    manifest.write(&dir)?;
    let start = Instant::now();
    let result = compute(cfg).and_then(|a| write_files(&dir, &a).map(|()| a));
    manifest.wall_seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(a) => {
            manifest.status = RunStatus::Ok;
            manifest.files = a.files.iter().map(|(n, _)| n.clone()).collect();
            manifest.warnings = a.warnings;
            manifest.details = a.details;
            manifest.write(&dir)?;
            Ok(RunOutcome { dir, manifest })
        }
        Err(e) => {
            for name in output_files(cfg.kind) {
                let _ = fs::remove_file(dir.join(name));
            }
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            manifest.write(&dir)?;
            Err(e)
        }
    }
}

fn write_files(dir: &Path, artifacts: &Artifacts) -> Result<(), RunError> {
    for (name, contents) in &artifacts.files {
        debug_assert_ne!(name, MANIFEST_FILE);
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
    }
    Ok(())
}
