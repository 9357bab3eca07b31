use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL_CONVERGE: &str = "\
kind = converge
seed = 3
n_paths = 200
output = small

[model]
type = merton
drift = 0.07
volatility = 0.2
intensity = 1
jump_law = two-point
jump_low = -0.4
jump_high = 0.25

[grid]
steps = 256

[strategy]
fractions = 0.6

[partition]
levels = 4, 16, 64
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_multapprox"));
    c.env_remove("MULTAPPROX_OUT");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_reports_every_issue_with_exit_1() {
    let tmp = TempDir::new().unwrap();
    let ok = write(tmp.path(), "ok.ini", SMALL_CONVERGE);
    let o = bin().arg("validate").arg(&ok).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let bad = SMALL_CONVERGE
        .replace("n_paths = 200", "n_paths = 1\ncolour = blue")
        .replace("intensity = 1", "intensity = 40")
        .replace("steps = 256", "steps = 256\nsteps = 512");
    let bad = write(tmp.path(), "bad.ini", &bad);
    let o = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("n_paths"), "{err}");
    assert!(err.contains("colour: unknown key"), "{err}");
    assert!(err.contains("jump resolution rule"), "{err}");
    assert!(err.contains("duplicate key (first set on line"), "{err}");
}

#[test]
fn run_with_too_few_paths_exits_1_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.ini", &SMALL_CONVERGE.replace("n_paths = 200", "n_paths = 1"));
    let out = tmp.path().join("out");
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn demo_negative_run_and_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "demo.ini", "kind = demo-negative\n");
    let out = tmp.path().join("out");
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let csv = fs::read_to_string(out.join("demo-negative/demo_negative.csv")).unwrap();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    let mult: f64 = last[4].parse().unwrap();
    let add: f64 = last[5].parse().unwrap();
    assert!((mult - 0.01).abs() < 1e-12);
    assert!((add + 0.0693881).abs() < 1e-12);
    assert!(csv.lines().nth(3).unwrap().ends_with(",additive:baseline-short"));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("demo-negative/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["files"], serde_json::json!(["demo_negative.csv"]));
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    let o = bin().arg("summarize").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("PASS: multiplicative nonnegative"), "{text}");
    assert!(text.contains("PASS: additive violation flagged"), "{text}");
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.ini", SMALL_CONVERGE);
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3", "1"].into_iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = bin()
            .args(["--threads", threads, "run"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(fs::read(out.join("small/convergence.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn output_root_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "demo.ini", "kind = demo-negative\noutput = d\n");
    let env_root = tmp.path().join("env");
    let o = bin()
        .env("MULTAPPROX_OUT", &env_root)
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("flag"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_root.join("d/demo_negative.csv").is_file());
    assert!(!tmp.path().join("flag").exists());
}

#[test]
fn runtime_failure_exits_2_and_removes_partial_csvs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "t.ini",
        "kind = terminal\nn_paths = 20\noutput = t\n[model]\ntype = black-scholes\ndrift = 0.05\nvolatility = 0.2\n[grid]\nsteps = 16\n[partition]\nlevels = 2, 4\n",
    );
    let out = tmp.path().join("out");
    // A directory where the second CSV should go makes the write fail
    // after utility.csv has been written.
    fs::create_dir_all(out.join("t/terminal_km.csv")).unwrap();
    let o = bin().arg("run").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!out.join("t/utility.csv").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("t/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
    assert!(manifest["error"].as_str().unwrap().contains("terminal_km.csv"));

    let o = bin().arg("summarize").arg(out.join("t")).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL: run status"));
}

#[test]
fn summarize_synthetic_reports() {
    let tmp = TempDir::new().unwrap();
    let header = "level,mesh,epsilon,p_hat,ci_lo,ci_hi,n_paths,seconds\n";

    let zero = tmp.path().join("zero");
    fs::create_dir(&zero).unwrap();
    write(&zero, "convergence.csv", &format!("{header}0,0.25,0.01,0,0,0.0004,10000,0\n1,0.0625,0.01,0,0,0.0004,10000,0\n"));
    let o = bin().arg("summarize").arg(&zero).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().skip(1).all(|l| l.starts_with("PASS")), "{text}");

    // p = 0.1 then 0.3 on 1000 paths: Wilson intervals do not overlap.
    let rising = tmp.path().join("rising");
    fs::create_dir(&rising).unwrap();
    write(
        &rising,
        "convergence.csv",
        &format!("{header}0,0.25,0.01,0.1,0.0829,0.1203,1000,0\n1,0.0625,0.01,0.3,0.2723,0.3292,1000,0\n"),
    );
    let o = bin().arg("summarize").arg(&rising).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL: monotonicity"), "{}", stdout(&o));

    let broken = tmp.path().join("broken");
    fs::create_dir(&broken).unwrap();
    write(&broken, "convergence.csv", "level,mesh,epsilon,ci_lo,ci_hi\n0,1,0.01,0,1\n");
    let o = bin().arg("summarize").arg(&broken).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing column `p_hat`"), "{}", stderr(&o));
}
