//! Pass/fail summary of emitted reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use multapprox_core::convergence::{monotonicity_break, Exceedance};

use crate::config::Thresholds;
use crate::manifest::{Manifest, RunStatus, MANIFEST_FILE};

#[derive(Debug, thiserror::Error)]
pub enum SummaryError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("{file}: line {line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Manifest(String),
    #[error("no reports found in {0}")]
    NoReports(PathBuf),
}

/// A parsed CSV file.
#[derive(Debug, Clone)]
pub struct Table {
    file: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(file: &str, text: &str) -> Result<Self, SummaryError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, head) = lines.next().ok_or_else(|| SummaryError::Malformed {
            file: file.into(),
            line: 1,
            message: "empty file".into(),
        })?;
        let header: Vec<String> = head.split(',').map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(SummaryError::Malformed {
                    file: file.into(),
                    line: i + 1,
                    message: format!("expected {} fields, found {}", header.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self {
            file: file.into(),
            header,
            rows,
        })
    }

    pub fn read(dir: &Path, file: &str) -> Result<Self, SummaryError> {
        let path = dir.join(file);
        let text = fs::read_to_string(&path).map_err(|source| SummaryError::Io { path, source })?;
        Self::parse(file, &text)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn index(&self, column: &str) -> Result<usize, SummaryError> {
        self.header
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| SummaryError::MissingColumn {
                file: self.file.clone(),
                column: column.into(),
            })
    }

    pub fn strings(&self, column: &str) -> Result<Vec<&str>, SummaryError> {
        let i = self.index(column)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Numeric column; empty cells read as NaN.
    pub fn numbers(&self, column: &str) -> Result<Vec<f64>, SummaryError> {
        let i = self.index(column)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(line, r)| {
                let cell = r[i].as_str();
                if cell.is_empty() {
                    return Ok(f64::NAN);
                }
                cell.parse().map_err(|_| SummaryError::Malformed {
                    file: self.file.clone(),
                    line: line + 2,
                    message: format!("`{cell}` in column `{column}` is not a number"),
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag}: {}", self.name)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub dir: PathBuf,
    pub kind: String,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub experiments: Vec<ExperimentSummary>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.experiments
            .iter()
            .all(|e| e.checks.iter().all(|c| c.passed))
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.experiments {
            writeln!(f, "[{}] {}", e.kind, e.dir.display())?;
            for c in &e.checks {
                writeln!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// Summarises `dir`: a run directory with a manifest, a directory of run
/// directories, or a bare directory of CSVs (checked with default
/// thresholds).
pub fn summarize(dir: &Path) -> Result<Summary, SummaryError> {
    let mut experiments = Vec::new();
    if dir.join(MANIFEST_FILE).is_file() {
        experiments.push(from_manifest(dir)?);
    } else {
        let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|source| SummaryError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(MANIFEST_FILE).is_file())
            .collect();
        subdirs.sort();
        for sub in &subdirs {
            experiments.push(from_manifest(sub)?);
        }
        if experiments.is_empty() {
            experiments = inferred(dir)?;
        }
    }
    if experiments.is_empty() {
        return Err(SummaryError::NoReports(dir.to_path_buf()));
    }
    Ok(Summary { experiments })
}

fn from_manifest(dir: &Path) -> Result<ExperimentSummary, SummaryError> {
    let m = Manifest::read(dir).map_err(SummaryError::Manifest)?;
    let checks = if m.status == RunStatus::Ok {
        check_kind(dir, &m.kind, &m.thresholds, m.wealth)?
    } else {
        let detail = m.error.clone().unwrap_or_else(|| format!("{:?}", m.status));
        vec![Check::new("run status", false, detail)]
    };
    Ok(ExperimentSummary {
        dir: dir.to_path_buf(),
        kind: m.kind,
        checks,
    })
}

/// Kinds recognisable from file names alone.
const INFERRED: [(&str, &str); 6] = [
    ("convergence.csv", "converge"),
    ("freeze.csv", "freeze"),
    ("residual.csv", "residual"),
    ("utility.csv", "utility-gap"),
    ("supermart.csv", "supermart"),
    ("demo_negative.csv", "demo-negative"),
];

fn inferred(dir: &Path) -> Result<Vec<ExperimentSummary>, SummaryError> {
    let thresholds = Thresholds::default();
    let mut out = Vec::new();
    for (file, kind) in INFERRED {
        if !dir.join(file).is_file() {
            continue;
        }
        let kind = if kind == "utility-gap" && dir.join("terminal_km.csv").is_file() {
            "terminal"
        } else {
            kind
        };
        out.push(ExperimentSummary {
            dir: dir.to_path_buf(),
            kind: kind.into(),
            checks: check_kind(dir, kind, &thresholds, 1.0)?,
        });
    }
    Ok(out)
}

/// Checks the reports of one run directory.
pub fn check_kind(
    dir: &Path,
    kind: &str,
    t: &Thresholds,
    wealth: f64,
) -> Result<Vec<Check>, SummaryError> {
    match kind {
        "converge" => convergence_checks(&Table::read(dir, "convergence.csv")?, t, wealth),
        "freeze" => convergence_checks(&Table::read(dir, "freeze.csv")?, t, wealth),
        "residual" => residual_checks(&Table::read(dir, "residual.csv")?, t),
        "utility-gap" => gap_checks(&Table::read(dir, "utility.csv")?, t),
        "terminal" => ladder_checks(&Table::read(dir, "utility.csv")?, "term_exceed", t),
        "uniform" => ladder_checks(&Table::read(dir, "utility.csv")?, "unif_exceed", t),
        "supermart" => supermart_checks(&Table::read(dir, "supermart.csv")?, t),
        "demo-negative" => demo_checks(&Table::read(dir, "demo_negative.csv")?),
        other => Err(SummaryError::Manifest(format!("unknown experiment kind `{other}`"))),
    }
}

fn exceedances(p: &[f64], lo: &[f64], hi: &[f64]) -> Vec<Exceedance> {
    p.iter()
        .zip(lo)
        .zip(hi)
        .map(|((&p_hat, &ci_lo), &ci_hi)| Exceedance {
            p_hat,
            ci_lo,
            ci_hi,
            n: f64::NAN,
        })
        .collect()
}

/// Monotonicity, final upper bound and optional negative-control checks
/// on one exceedance column.
fn exceedance_checks(levels: &[Exceedance], t: &Thresholds) -> Vec<Check> {
    if levels.is_empty() {
        return vec![Check::new("rows", false, "no levels")];
    }
    if let Some(min) = t.min_exceedance {
        let worst = levels.iter().map(|e| e.p_hat).fold(f64::INFINITY, f64::min);
        return vec![Check::new(
            "negative control",
            worst > min,
            format!("smallest p_hat {worst} vs {min}"),
        )];
    }
    let mono = match monotonicity_break(levels) {
        None => Check::new("monotonicity", true, ""),
        Some(i) => Check::new(
            "monotonicity",
            false,
            format!(
                "level {i}: p_hat {} above {} beyond CI overlap",
                levels[i].p_hat,
                levels[i - 1].p_hat
            ),
        ),
    };
    let last = levels[levels.len() - 1];
    let upper = Check::new(
        "final upper CI",
        last.ci_hi < t.max_final_upper,
        format!("{} vs {}", last.ci_hi, t.max_final_upper),
    );
    vec![mono, upper]
}

fn convergence_checks(table: &Table, t: &Thresholds, wealth: f64) -> Result<Vec<Check>, SummaryError> {
    let eps = table.numbers("epsilon")?;
    let p = table.numbers("p_hat")?;
    let lo = table.numbers("ci_lo")?;
    let hi = table.numbers("ci_hi")?;
    let target = t.epsilon * wealth;
    let pick: Vec<usize> = (0..eps.len())
        .filter(|&i| (eps[i] - target).abs() <= 1e-12 * target.abs().max(1.0))
        .collect();
    if pick.is_empty() {
        return Ok(vec![Check::new(
            "threshold column",
            false,
            format!("no rows at epsilon {target}"),
        )]);
    }
    let sel = |v: &[f64]| pick.iter().map(|&i| v[i]).collect::<Vec<_>>();
    Ok(exceedance_checks(&exceedances(&sel(&p), &sel(&lo), &sel(&hi)), t))
}

fn residual_checks(table: &Table, t: &Thresholds) -> Result<Vec<Check>, SummaryError> {
    let med = table.numbers("median_abs")?;
    let decreasing = med.windows(2).all(|w| w[1] < w[0]);
    let ratios: Vec<f64> = med.windows(2).map(|w| w[0] / w[1]).collect();
    let in_band = ratios.iter().all(|r| (t.min_ratio..=t.max_ratio).contains(r));
    let list = ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ");
    Ok(vec![
        Check::new("strictly decreasing", decreasing && !med.is_empty(), ""),
        Check::new(
            "ratios in band",
            in_band && !ratios.is_empty(),
            format!("[{list}] vs [{}, {}]", t.min_ratio, t.max_ratio),
        ),
    ])
}

fn gap_checks(table: &Table, t: &Thresholds) -> Result<Vec<Check>, SummaryError> {
    let eu = table.numbers("eu_simple")?;
    let se = table.numbers("se")?;
    let reference = table.numbers("eu_ref")?;
    let gap = table.numbers("gap")?;
    let Some(last) = eu.len().checked_sub(1) else {
        return Ok(vec![Check::new("rows", false, "no levels")]);
    };
    let z = (eu[last] - reference[last]).abs() / se[last];
    let decreasing = gap.windows(2).all(|w| w[1].abs() <= w[0].abs() + 1e-12);
    Ok(vec![
        Check::new(
            "finest level near reference",
            z <= t.reference_se,
            format!("{z:.3} standard errors vs {}", t.reference_se),
        ),
        Check::new("gap decreasing", decreasing, ""),
    ])
}

fn ladder_checks(table: &Table, column: &str, t: &Thresholds) -> Result<Vec<Check>, SummaryError> {
    let p = table.numbers(column)?;
    let lo = table.numbers("ci_lo")?;
    let hi = table.numbers("ci_hi")?;
    Ok(exceedance_checks(&exceedances(&p, &lo, &hi), t))
}

fn supermart_checks(table: &Table, t: &Thresholds) -> Result<Vec<Check>, SummaryError> {
    let p = table.numbers("sup_exceed")?;
    let lo = table.numbers("ci_lo")?;
    let hi = table.numbers("ci_hi")?;
    Ok(exceedance_checks(&exceedances(&p, &lo, &hi), t))
}

fn demo_checks(table: &Table) -> Result<Vec<Check>, SummaryError> {
    let mult = table.numbers("multiplicative")?;
    let add = table.numbers("additive")?;
    let flags = table.strings("violation")?;
    let flagged = |engine: &str| {
        flags
            .iter()
            .flat_map(|f| f.split(';'))
            .any(|f| f.starts_with(engine))
    };
    let mult_min = mult.iter().copied().fold(f64::INFINITY, f64::min);
    let add_end = add.last().copied().unwrap_or(f64::NAN);
    Ok(vec![
        Check::new(
            "multiplicative nonnegative",
            mult_min >= 0.0 && !flagged("multiplicative:"),
            format!("minimum {mult_min}"),
        ),
        Check::new(
            "additive violation flagged",
            add_end < 0.0 && flagged("additive:"),
            format!("terminal additive wealth {add_end}"),
        ),
    ])
}
