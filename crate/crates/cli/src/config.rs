//! Experiment configuration files.
//!
//! ```text
//! kind = converge          # converge | residual | freeze | utility-gap |
//!                          # terminal | uniform | supermart | demo-negative
//! seed = 7                 # default 0
//! n_paths = 10000          # default 1000, at least 2
//! output = converge        # directory under the output root, default: kind
//!
//! [model]
//! type = merton            # black-scholes | merton | fixture
//! drift = 0.07             # comma lists for several assets
//! volatility = 0.2
//! initial = 1
//! correlation = 0.3        # one value (equicorrelation) or d*d entries
//! intensity = 1
//! jump_law = two-point     # fixed | two-point | lognormal
//! jump_low = -0.4
//! jump_high = 0.25
//! jump_p_low = 0.5
//!
//! [grid]
//! horizon = 1
//! steps = 4096
//!
//! [strategy]
//! type = constant          # constant | ramp
//! fractions = 0.6
//!
//! [partition]
//! type = uniform           # uniform | dyadic | price
//! levels = 4, 16, 64, 256, 1024
//!
//! [experiment]
//! epsilons = 0.05, 0.01, 0.002
//!
//! [acceptance]
//! epsilon = 0.01
//! max_final_upper = 0.05
//! ```
//!
//! Which keys are accepted depends on `kind`; anything else is an error.

use std::collections::BTreeSet;
use std::path::Path;

use multapprox_core::convergence::{PartitionLadder, DEFAULT_RELATIVE_EPSILONS};
use multapprox_core::market::{
    Diffusion, JumpLaw, Jumps, MarketError, ModelSpec, PriceTable, TimeGrid,
};
use multapprox_core::portfolio::{FractionStrategy, PartitionRule, SimplexVector};
use multapprox_core::utility::{SupermartingaleFamily, UtilityFn};
use serde::Serialize;

use crate::ini::{ConfigIssue, Document};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Converge,
    Residual,
    Freeze,
    UtilityGap,
    Terminal,
    Uniform,
    Supermart,
    DemoNegative,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Converge,
        ExperimentKind::Residual,
        ExperimentKind::Freeze,
        ExperimentKind::UtilityGap,
        ExperimentKind::Terminal,
        ExperimentKind::Uniform,
        ExperimentKind::Supermart,
        ExperimentKind::DemoNegative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Converge => "converge",
            ExperimentKind::Residual => "residual",
            ExperimentKind::Freeze => "freeze",
            ExperimentKind::UtilityGap => "utility-gap",
            ExperimentKind::Terminal => "terminal",
            ExperimentKind::Uniform => "uniform",
            ExperimentKind::Supermart => "supermart",
            ExperimentKind::DemoNegative => "demo-negative",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    fn is_utility(self) -> bool {
        matches!(
            self,
            ExperimentKind::UtilityGap | ExperimentKind::Terminal | ExperimentKind::Uniform
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    Constant(SimplexVector),
    /// `weights · min(t/T, cap)`.
    Ramp { weights: SimplexVector, cap: f64 },
}

impl StrategySpec {
    pub fn build(&self) -> FractionStrategy {
        match self {
            StrategySpec::Constant(f) => FractionStrategy::constant(f.clone()),
            StrategySpec::Ramp { weights, cap } => FractionStrategy::ramp(weights.clone(), *cap)
                .expect("ramp validated at parse time"),
        }
    }

    fn dim(&self) -> usize {
        match self {
            StrategySpec::Constant(f) => f.dim(),
            StrategySpec::Ramp { weights, .. } => weights.dim(),
        }
    }
}

/// Pass/fail thresholds checked by `summarize`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Thresholds {
    /// Threshold (relative to initial wealth) whose column is checked.
    pub epsilon: f64,
    /// Largest admissible upper CI bound at the finest level.
    pub max_final_upper: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Negative controls: every level must exceed this.
    pub min_exceedance: Option<f64>,
    /// Standard errors allowed between the finest estimate and reference.
    pub reference_se: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_final_upper: 0.05,
            min_ratio: 1.5,
            max_ratio: 2.8,
            min_exceedance: None,
            reference_se: 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub n_paths: usize,
    pub output: String,
    /// Absent for supermartingale runs.
    pub model: Option<ModelSpec>,
    pub grid: TimeGrid,
    pub strategy: Option<StrategySpec>,
    pub ladder: Option<PartitionLadder>,
    /// Relative thresholds for convergence runs.
    pub epsilons: Vec<f64>,
    /// Relative threshold for utility and supermartingale runs.
    pub epsilon: f64,
    pub wealth: f64,
    pub fine_steps: Vec<usize>,
    pub scale_eps: f64,
    pub residual_partition: PartitionRule,
    pub coarse_steps: Vec<usize>,
    pub utility: UtilityFn,
    pub fractions: Option<SimplexVector>,
    pub shift: Option<f64>,
    pub family: Option<SupermartingaleFamily>,
    pub rebalance: Vec<usize>,
    pub record_timing: bool,
    pub thresholds: Thresholds,
}

/// Prices of the built-in nonnegativity fixture.
pub const DEMO_PRICES: [f64; 4] = [1.0, 10.0, 1.0, 0.0];

pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![ConfigIssue {
            line: None,
            key: path.display().to_string(),
            message: format!("cannot read: {e}"),
        }]
    })?;
    parse_config_with_base(&text, path.parent())
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    parse_config_with_base(text, None)
}

/// Parses `text`; relative fixture files resolve against `base`.
pub fn parse_config_with_base(
    text: &str,
    base: Option<&Path>,
) -> Result<ExperimentConfig, Vec<ConfigIssue>> {
    let doc = Document::parse(text);
    let cfg = build(&doc, base);
    let allowed = allowed_keys(&doc);
    let issues = doc.finish(&allowed);
    match cfg {
        Some(cfg) if issues.is_empty() => Ok(cfg),
        _ if issues.is_empty() => Err(vec![ConfigIssue {
            line: None,
            key: "config".into(),
            message: "invalid configuration".into(),
        }]),
        _ => Err(issues),
    }
}

fn simplex(doc: &Document, key: &str) -> Option<SimplexVector> {
    let v = doc.f64_list(key)?;
    match SimplexVector::new(v) {
        Ok(s) => Some(s),
        Err(e) => {
            doc.error(key, e.to_string());
            None
        }
    }
}

/// Scalar or per-asset list broadcast to `d` entries.
fn per_asset(doc: &Document, key: &str, d: usize) -> Option<Vec<f64>> {
    let v = doc.f64_list(key)?;
    match v.len() {
        1 => Some(vec![v[0]; d]),
        n if n == d => Some(v),
        n => {
            doc.error(key, format!("expected 1 or {d} values, found {n}"));
            None
        }
    }
}

fn jump_law(doc: &Document) -> Option<JumpLaw> {
    let law = match doc.choice("model.jump_law", &["fixed", "two-point", "lognormal"])? {
        "fixed" => JumpLaw::Fixed(required_f64(doc, "model.jump_size")?),
        "two-point" => {
            let low = required_f64(doc, "model.jump_low");
            let high = required_f64(doc, "model.jump_high");
            let p = doc.f64("model.jump_p_low").unwrap_or(0.5);
            JumpLaw::TwoPoint { low: low?, high: high?, p_low: p }
        }
        _ => {
            let mean = required_f64(doc, "model.jump_mean");
            let sd = required_f64(doc, "model.jump_std");
            JumpLaw::ShiftedLogNormal { mean: mean?, std_dev: sd? }
        }
    };
    if let Err(e) = law.validate() {
        doc.error("model.jump_law", e.to_string());
        return None;
    }
    Some(law)
}

fn required_f64(doc: &Document, key: &str) -> Option<f64> {
    doc.required(key)?;
    doc.f64(key)
}

fn fixture_rows(doc: &Document, base: Option<&Path>) -> Option<PriceTable> {
    let horizon = doc.f64("grid.horizon").unwrap_or(1.0);
    let table = if let Some(file) = doc.raw("model.file") {
        let path = base.map_or_else(|| Path::new(file).to_path_buf(), |b| b.join(file));
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                doc.error("model.file", format!("cannot read {}: {e}", path.display()));
                return None;
            }
        };
        PriceTable::parse(&text)
    } else if let Some(raw) = doc.raw("model.prices") {
        let rows: Option<Vec<Vec<f64>>> = raw
            .split(';')
            .map(|row| row.split(',').map(|x| x.trim().parse().ok()).collect())
            .collect();
        let Some(rows) = rows else {
            doc.error("model.prices", "expected rows of numbers separated by `;`");
            return None;
        };
        PriceTable::uniform(horizon, rows)
    } else {
        doc.error("model", "fixture needs `prices` or `file`");
        return None;
    };
    table.map_err(|e| doc.error("model", e.to_string())).ok()
}

fn model(doc: &Document, base: Option<&Path>) -> Option<ModelSpec> {
    let kind = doc.choice("model.type", &["black-scholes", "merton", "fixture"]);
    if kind.is_none() && doc.raw("model.type").is_none() {
        doc.error("model.type", "missing required key");
    }
    match kind? {
        "fixture" => fixture_rows(doc, base).map(ModelSpec::Fixture),
        kind => {
            let drift = doc.required("model.drift").and(doc.f64_list("model.drift"));
            let d = drift.as_ref().map_or(1, Vec::len);
            let vol = doc.required("model.volatility").and(per_asset(doc, "model.volatility", d));
            let initial = per_asset(doc, "model.initial", d).unwrap_or(vec![1.0; d]);
            let mut diffusion = Diffusion::new(drift?, vol?, initial);
            if doc.raw("model.correlation").is_some() {
                let c = doc.f64_list("model.correlation")?;
                let matrix = if c.len() == 1 {
                    (0..d * d)
                        .map(|k| if k / d == k % d { 1.0 } else { c[0] })
                        .collect()
                } else {
                    c
                };
                diffusion = diffusion.with_correlation(matrix);
            }
            if kind == "black-scholes" {
                Some(ModelSpec::BlackScholes(diffusion))
            } else {
                let intensity = doc.required("model.intensity").and(per_asset(doc, "model.intensity", d));
                let law = jump_law(doc);
                Some(ModelSpec::MertonJumpDiffusion {
                    diffusion,
                    jumps: Jumps { intensity: intensity?, law: vec![law?; d] },
                })
            }
        }
    }
}

fn market_key(e: &MarketError) -> &'static str {
    match e {
        MarketError::JumpResolution { .. } => "model.intensity",
        MarketError::InvalidCorrelation(_) => "model.correlation",
        MarketError::InvalidGrid(_) => "grid",
        _ => "model",
    }
}

fn validate_model(doc: &Document, model: &ModelSpec, grid: &TimeGrid) -> bool {
    match model.validate(grid) {
        Ok(_) => true,
        Err(e) => {
            doc.error(market_key(&e), e.to_string());
            false
        }
    }
}

fn grid(doc: &Document, default_steps: usize, read_steps: bool) -> Option<TimeGrid> {
    let horizon = doc.f64("grid.horizon").unwrap_or(1.0);
    let steps = if read_steps {
        doc.usize("grid.steps").unwrap_or(default_steps)
    } else {
        default_steps
    };
    TimeGrid::new(horizon, steps)
        .map_err(|e| doc.error("grid", e.to_string()))
        .ok()
}

fn strategy(doc: &Document, default: Option<f64>) -> Option<StrategySpec> {
    let kind = doc.choice("strategy.type", &["constant", "ramp"]).unwrap_or("constant");
    let fractions = if doc.raw("strategy.fractions").is_none() {
        match default {
            Some(v) => SimplexVector::new(vec![v]).ok(),
            None => {
                doc.error("strategy.fractions", "missing required key");
                None
            }
        }
    } else {
        simplex(doc, "strategy.fractions")
    };
    match kind {
        "ramp" => {
            let cap = doc.f64("strategy.cap").unwrap_or(1.0);
            if !(0.0..=1.0).contains(&cap) {
                doc.error("strategy.cap", format!("cap must lie in [0, 1], got {cap}"));
                return None;
            }
            Some(StrategySpec::Ramp { weights: fractions?, cap })
        }
        _ => fractions.map(StrategySpec::Constant),
    }
}

fn rules(doc: &Document) -> Option<Vec<PartitionRule>> {
    let kind = doc.choice("partition.type", &["uniform", "dyadic", "price"]).unwrap_or("uniform");
    doc.required("partition.levels")?;
    let rules: Vec<PartitionRule> = match kind {
        "price" => doc
            .f64_list("partition.levels")?
            .into_iter()
            .map(PartitionRule::PriceTriggered)
            .collect(),
        "dyadic" => doc
            .usize_list("partition.levels")?
            .into_iter()
            .map(|k| PartitionRule::Dyadic(k as u32))
            .collect(),
        _ => doc
            .usize_list("partition.levels")?
            .into_iter()
            .map(PartitionRule::Uniform)
            .collect(),
    };
    Some(rules)
}

fn ladder(doc: &Document, grid: &TimeGrid) -> Option<PartitionLadder> {
    let ladder = PartitionLadder::new(rules(doc)?)
        .map_err(|e| doc.error("partition.levels", e.to_string()))
        .ok()?;
    ladder
        .check_grid(grid)
        .map_err(|e| doc.error("partition.levels", e.to_string()))
        .ok()?;
    Some(ladder)
}

fn increasing(doc: &Document, key: &str, v: &[usize]) -> bool {
    if v.is_empty() || v.windows(2).any(|w| w[1] <= w[0]) || v[0] == 0 {
        doc.error(key, "expected a non-empty, strictly increasing list of positive integers");
        return false;
    }
    true
}

fn thresholds(doc: &Document) -> Thresholds {
    let d = Thresholds::default();
    let t = Thresholds {
        epsilon: doc.f64("acceptance.epsilon").unwrap_or(d.epsilon),
        max_final_upper: doc.f64("acceptance.max_final_upper").unwrap_or(d.max_final_upper),
        min_ratio: doc.f64("acceptance.min_ratio").unwrap_or(d.min_ratio),
        max_ratio: doc.f64("acceptance.max_ratio").unwrap_or(d.max_ratio),
        min_exceedance: doc.f64("acceptance.min_exceedance"),
        reference_se: doc.f64("acceptance.reference_se").unwrap_or(d.reference_se),
    };
    if !(t.epsilon > 0.0) {
        doc.error("acceptance.epsilon", "must be positive");
    }
    if t.min_ratio > t.max_ratio {
        doc.error("acceptance.min_ratio", "must not exceed max_ratio");
    }
    t
}

fn build(doc: &Document, base: Option<&Path>) -> Option<ExperimentConfig> {
    let kind_raw = doc.required("kind")?;
    let Some(kind) = ExperimentKind::from_name(kind_raw) else {
        let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
        doc.error("kind", format!("expected one of {}, found `{kind_raw}`", names.join(", ")));
        return None;
    };
    let seed = doc.u64("seed").unwrap_or(0);
    let n_paths = if kind == ExperimentKind::DemoNegative {
        1
    } else {
        let n = doc.usize("n_paths").unwrap_or(1000);
        if n < 2 {
            doc.error("n_paths", format!("statistical experiments need at least 2 paths, got {n}"));
        }
        n
    };
    let output = doc.raw("output").unwrap_or(kind.name()).to_string();
    if output.is_empty() || Path::new(&output).is_absolute() || output.split('/').any(|c| c == "..") {
        doc.error("output", "must be a relative directory name without `..`");
    }
    let wealth = doc.f64("experiment.wealth").unwrap_or(1.0);
    if !(wealth > 0.0) {
        doc.error("experiment.wealth", format!("initial wealth must be positive, got {wealth}"));
    }
    let record_timing = if matches!(kind, ExperimentKind::Converge | ExperimentKind::Freeze) {
        doc.bool("experiment.record_timing").unwrap_or(false)
    } else {
        false
    };
    let thresholds = thresholds(doc);

    let mut cfg = ExperimentConfig {
        kind,
        seed,
        n_paths,
        output,
        model: None,
        grid: TimeGrid::new(1.0, 1).expect("unit grid"),
        strategy: None,
        ladder: None,
        epsilons: DEFAULT_RELATIVE_EPSILONS.to_vec(),
        epsilon: 0.01,
        wealth,
        fine_steps: Vec::new(),
        scale_eps: 0.1,
        residual_partition: PartitionRule::Uniform(16),
        coarse_steps: Vec::new(),
        utility: UtilityFn::Log,
        fractions: None,
        shift: None,
        family: None,
        rebalance: Vec::new(),
        record_timing,
        thresholds,
    };
    let mut ok = true;

    match kind {
        ExperimentKind::Supermart => {
            cfg.grid = grid(doc, 256, true)?;
            cfg.epsilon = doc.f64("experiment.epsilon").unwrap_or(0.1);
            let family = doc.choice("experiment.family", &["exp", "drifted"]).unwrap_or("exp");
            let sigmas = doc.required("experiment.sigmas").and(doc.f64_list("experiment.sigmas"));
            let sigmas = sigmas?;
            cfg.family = Some(if family == "drifted" {
                let drifts = doc.required("experiment.drifts").and(doc.f64_list("experiment.drifts"))?;
                SupermartingaleFamily::DriftedDown { sigmas, drifts }
            } else {
                SupermartingaleFamily::ExpMartingale { sigmas }
            });
        }
        ExperimentKind::DemoNegative => {
            let model = if doc.has_section("model") {
                let m = model(doc, base)?;
                if !matches!(m, ModelSpec::Fixture(_)) {
                    doc.error("model.type", "demo-negative runs on a fixture");
                    return None;
                }
                m
            } else {
                let rows = DEMO_PRICES.iter().map(|&s| vec![s]).collect();
                ModelSpec::Fixture(PriceTable::uniform(1.0, rows).expect("valid fixture"))
            };
            let ModelSpec::Fixture(table) = &model else { unreachable!() };
            cfg.grid = table.grid();
            cfg.strategy = strategy(doc, Some(0.99));
            cfg.rebalance = doc.usize_list("experiment.rebalance").unwrap_or(vec![0, 2]);
            let n = cfg.grid.n_steps();
            if cfg.rebalance.first() != Some(&0)
                || cfg.rebalance.windows(2).any(|w| w[1] <= w[0])
                || cfg.rebalance.last().is_some_and(|&k| k >= n)
            {
                doc.error(
                    "experiment.rebalance",
                    format!("expected increasing indices starting at 0 and below {n}"),
                );
                ok = false;
            }
            cfg.model = Some(model);
        }
        _ => {
            let m = model(doc, base);
            if kind == ExperimentKind::Residual {
                cfg.grid = grid(doc, 1, false)?;
                cfg.fine_steps = doc
                    .required("experiment.fine_steps")
                    .and(doc.usize_list("experiment.fine_steps"))?;
                ok &= increasing(doc, "experiment.fine_steps", &cfg.fine_steps);
                cfg.scale_eps = doc.f64("experiment.scale_eps").unwrap_or(0.1);
                if !(0.0..1.0).contains(&cfg.scale_eps) {
                    doc.error("experiment.scale_eps", "must lie in [0, 1)");
                    ok = false;
                }
                if doc.has_section("partition") {
                    let r = rules(doc)?;
                    if r.len() != 1 {
                        doc.error("partition.levels", "residual runs take exactly one level");
                        return None;
                    }
                    cfg.residual_partition = r[0];
                }
                if let (Some(m), true) = (&m, ok) {
                    for &n in &cfg.fine_steps {
                        let g = TimeGrid::new(cfg.grid.horizon(), n)
                            .map_err(|e| doc.error("experiment.fine_steps", e.to_string()))
                            .ok()?;
                        if let Some(steps) = intervals_needed(cfg.residual_partition) {
                            if steps > n {
                                doc.error("partition.levels", format!("{steps} intervals exceed {n} fine steps"));
                                ok = false;
                            }
                        }
                        ok &= validate_model(doc, m, &g);
                    }
                }
            } else {
                let fixture_grid = match &m {
                    Some(ModelSpec::Fixture(t)) => Some(t.grid()),
                    _ => None,
                };
                cfg.grid = match fixture_grid {
                    Some(g) => g,
                    None => grid(doc, 1024, true)?,
                };
                if let Some(m) = &m {
                    ok &= validate_model(doc, m, &cfg.grid);
                }
            }
            match kind {
                ExperimentKind::Converge => {
                    cfg.ladder = ladder(doc, &cfg.grid);
                    ok &= cfg.ladder.is_some();
                }
                ExperimentKind::Freeze => {
                    cfg.coarse_steps = doc
                        .required("experiment.coarse_steps")
                        .and(doc.usize_list("experiment.coarse_steps"))?;
                    ok &= increasing(doc, "experiment.coarse_steps", &cfg.coarse_steps);
                    if cfg.coarse_steps.last().is_some_and(|&m| m > cfg.grid.n_steps()) {
                        doc.error("experiment.coarse_steps", "coarse step counts cannot exceed grid.steps");
                        ok = false;
                    }
                }
                _ => {}
            }
            if matches!(kind, ExperimentKind::Converge | ExperimentKind::Freeze) {
                if let Some(e) = doc.f64_list("experiment.epsilons") {
                    cfg.epsilons = e;
                }
                if cfg.epsilons.iter().any(|e| !(*e > 0.0)) {
                    doc.error("experiment.epsilons", "thresholds must be positive");
                    ok = false;
                }
            }
            if kind.is_utility() {
                cfg.ladder = ladder(doc, &cfg.grid);
                ok &= cfg.ladder.is_some();
                cfg.epsilon = doc.f64("experiment.epsilon").unwrap_or(0.01);
                cfg.utility = match doc.choice("experiment.utility", &["log", "crra"]).unwrap_or("log") {
                    "crra" => {
                        let g = doc.required("experiment.gamma").and(doc.f64("experiment.gamma"))?;
                        match UtilityFn::crra(g) {
                            Ok(u) => u,
                            Err(e) => {
                                doc.error("experiment.gamma", e.to_string());
                                return None;
                            }
                        }
                    }
                    _ => UtilityFn::Log,
                };
                if doc.raw("experiment.fractions").is_some() {
                    cfg.fractions = simplex(doc, "experiment.fractions");
                    ok &= cfg.fractions.is_some();
                }
                cfg.shift = doc.f64("experiment.shift");
                if let Some(s) = cfg.shift {
                    if !(s > 0.0 && s < wealth) {
                        doc.error("experiment.shift", "must lie strictly between 0 and the initial wealth");
                        ok = false;
                    }
                }
                if matches!(m, Some(ModelSpec::Fixture(_))) {
                    doc.error("model.type", "utility experiments need a black-scholes or merton model");
                    ok = false;
                }
            } else {
                cfg.strategy = strategy(doc, None);
                ok &= cfg.strategy.is_some();
            }
            if !(cfg.epsilon > 0.0) {
                doc.error("experiment.epsilon", "must be positive");
                ok = false;
            }
            cfg.model = m;
        }
    }

    if let (Some(m), Some(s)) = (&cfg.model, &cfg.strategy) {
        if m.dim() != s.dim() {
            doc.error(
                "strategy.fractions",
                format!("strategy has {} assets, model has {}", s.dim(), m.dim()),
            );
            ok = false;
        }
    }
    if let (Some(m), Some(f)) = (&cfg.model, &cfg.fractions) {
        if m.dim() != f.dim() {
            doc.error("experiment.fractions", format!("expected {} fractions", m.dim()));
            ok = false;
        }
    }
    (ok && cfg.model.is_some() == (kind != ExperimentKind::Supermart)).then_some(cfg)
}

/// Keys accepted for the document's kind and model type.
fn allowed_keys(doc: &Document) -> BTreeSet<String> {
    let mut keys: Vec<&str> = vec![
        "kind",
        "seed",
        "output",
        "acceptance.epsilon",
        "acceptance.max_final_upper",
        "acceptance.min_ratio",
        "acceptance.max_ratio",
        "acceptance.min_exceedance",
        "acceptance.reference_se",
    ];
    let Some(kind) = doc.raw("kind").and_then(ExperimentKind::from_name) else {
        // Without a kind every key is suspect; report only the kind.
        return doc.keys().map(str::to_string).collect();
    };
    use ExperimentKind::*;
    if kind != DemoNegative {
        keys.push("n_paths");
    }
    if kind != Supermart {
        keys.push("experiment.wealth");
        keys.push("model.type");
        keys.extend(match doc.raw("model.type") {
            Some("fixture") => vec!["model.prices", "model.file"],
            Some("merton") => {
                let mut k = vec![
                    "model.drift",
                    "model.volatility",
                    "model.initial",
                    "model.correlation",
                    "model.intensity",
                    "model.jump_law",
                ];
                k.extend(match doc.raw("model.jump_law") {
                    Some("fixed") => vec!["model.jump_size"],
                    Some("two-point") => vec!["model.jump_low", "model.jump_high", "model.jump_p_low"],
                    Some("lognormal") => vec!["model.jump_mean", "model.jump_std"],
                    _ => vec![],
                });
                k
            }
            _ => vec!["model.drift", "model.volatility", "model.initial", "model.correlation"],
        });
    }
    keys.push("grid.horizon");
    let fixture = doc.raw("model.type") == Some("fixture");
    if !matches!(kind, Residual | DemoNegative) && !fixture {
        keys.push("grid.steps");
    }
    if matches!(kind, Converge | Freeze | Residual | DemoNegative) {
        keys.extend(["strategy.type", "strategy.fractions", "strategy.cap"]);
    }
    if matches!(kind, Converge | Residual | UtilityGap | Terminal | Uniform) {
        keys.extend(["partition.type", "partition.levels"]);
    }
    keys.extend(match kind {
        Converge => vec!["experiment.epsilons", "experiment.record_timing"],
        Freeze => vec!["experiment.epsilons", "experiment.record_timing", "experiment.coarse_steps"],
        Residual => vec!["experiment.fine_steps", "experiment.scale_eps"],
        UtilityGap | Terminal | Uniform => vec![
            "experiment.epsilon",
            "experiment.utility",
            "experiment.gamma",
            "experiment.fractions",
            "experiment.shift",
        ],
        Supermart => vec![
            "experiment.epsilon",
            "experiment.family",
            "experiment.sigmas",
            "experiment.drifts",
        ],
        DemoNegative => vec!["experiment.rebalance"],
    });
    keys.into_iter().map(str::to_string).collect()
}

fn intervals_needed(rule: PartitionRule) -> Option<usize> {
    multapprox_core::convergence::intervals(rule)
}
