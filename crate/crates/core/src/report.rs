//! CSV emission. Floats use Rust's shortest round-trip formatting, so
//! output bytes are a pure function of the values.

use std::fmt::Write;

use crate::convergence::{ConvergenceReport, ResidualReport};
use crate::portfolio::WealthPaths;
use crate::utility::{SupermartingaleReport, UtilityReport};

pub const CONVERGENCE_HEADER: &str = "level,mesh,epsilon,p_hat,ci_lo,ci_hi,n_paths,seconds";
pub const UTILITY_HEADER: &str = "level,mesh,eu_simple,se,eu_ref,gap,term_exceed,unif_exceed,ci_lo,ci_hi";
pub const KM_HEADER: &str = "level,m,beta,p_km,bound";
pub const RESIDUAL_HEADER: &str = "n_steps,median_abs,mean_abs,max_abs,ratio";
pub const SUPERMART_HEADER: &str = "level,sigma,term_exceed,sup_exceed,ci_lo,ci_hi,terminal_mean,means_non_increasing";
pub const WEALTH_HEADER: &str = "path,k,t,wealth";

fn table<T>(header: &str, rows: &[T], mut line: impl FnMut(&mut String, &T)) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for r in rows {
        line(&mut out, r);
        out.push('\n');
    }
    out
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    table(CONVERGENCE_HEADER, &report.rows, |s, r| {
        let e = r.exceedance;
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.level, r.mesh, r.epsilon, e.p_hat, e.ci_lo, e.ci_hi, r.n_paths, r.seconds
        );
    })
}

pub fn utility_csv(report: &UtilityReport) -> String {
    table(UTILITY_HEADER, &report.rows, |s, r| {
        let (lo, hi) = r.interval(report.focus);
        let uniform = r.uniform.map_or(f64::NAN, |u| u.p_hat);
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.level,
            r.mesh,
            r.eu_simple.mean,
            r.eu_simple.se,
            r.eu_ref,
            r.gap,
            r.terminal.p_hat,
            uniform,
            lo,
            hi
        );
    })
}

pub fn km_csv(report: &UtilityReport) -> String {
    table(KM_HEADER, &report.km, |s, k| {
        let _ = write!(s, "{},{},{},{},{}", k.level, k.m, k.beta, k.p_km, k.bound);
    })
}

pub fn residual_csv(report: &ResidualReport) -> String {
    table(RESIDUAL_HEADER, &report.rows, |s, r| {
        let ratio = r.ratio.map_or(String::new(), |v| v.to_string());
        let _ = write!(s, "{},{},{},{},{}", r.n_steps, r.median_abs, r.mean_abs, r.max_abs, ratio);
    })
}

pub fn supermart_csv(report: &SupermartingaleReport) -> String {
    table(SUPERMART_HEADER, &report.rows, |s, r| {
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.level,
            r.parameter,
            r.terminal.p_hat,
            r.sup.p_hat,
            r.sup.ci_lo,
            r.sup.ci_hi,
            r.terminal_mean,
            r.means_non_increasing
        );
    })
}

/// Long format, one row per path and grid index.
pub fn wealth_csv(wealth: &WealthPaths) -> String {
    let grid = wealth.grid();
    let mut out = String::from(WEALTH_HEADER);
    out.push('\n');
    for p in 0..wealth.n_paths() {
        for (k, v) in wealth.path(p).iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", p, k, grid.time(k), v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convergence::{ConvergenceRow, Exceedance};
    use crate::market::TimeGrid;
    use crate::portfolio::Engine;

    #[test]
    fn convergence_layout() {
        let report = ConvergenceReport {
            rows: vec![ConvergenceRow {
                level: 0,
                label: "uniform(4)".into(),
                mesh: 0.25,
                epsilon: 0.01,
                exceedance: Exceedance { p_hat: 0.5, ci_lo: 0.1, ci_hi: 0.9, n: 2.0 },
                n_paths: 2,
                seconds: 0.0,
            }],
            distances: vec![],
            bankrupt_paths: 0,
        };
        assert_eq!(
            convergence_csv(&report),
            "level,mesh,epsilon,p_hat,ci_lo,ci_hi,n_paths,seconds\n0,0.25,0.01,0.5,0.1,0.9,2,0\n"
        );
    }

    #[test]
    fn wealth_layout() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let w = WealthPaths::from_rows(grid, Engine::Continuous, vec![vec![1.0, 1.5, 0.75]]).unwrap();
        assert_eq!(wealth_csv(&w), "path,k,t,wealth\n0,0,0,1\n0,1,0.5,1.5\n0,2,1,0.75\n");
    }
}
