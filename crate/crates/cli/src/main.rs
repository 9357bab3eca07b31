use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multapprox_cli::config::parse_config_file;
use multapprox_cli::run::execute;
use multapprox_cli::summarize::summarize;

/// Output root override; takes precedence over `--out`.
const OUT_ENV: &str = "MULTAPPROX_OUT";

#[derive(Parser)]
#[command(name = "multapprox", version, about = "Multiplicative approximation experiments")]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output root; the run writes to `<out>/<output>`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// Print pass/fail lines for the reports under a directory.
    Summarize { dir: PathBuf },
}

const VALIDATION: u8 = 1;
const RUNTIME: u8 = 2;

fn load(path: &Path) -> Result<(multapprox_cli::config::ExperimentConfig, String), ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(VALIDATION)
    })?;
    match parse_config_file(path) {
        Ok(cfg) => Ok((cfg, text)),
        Err(issues) => {
            for issue in issues {
                eprintln!("{}: {issue}", path.display());
            }
            Err(ExitCode::from(VALIDATION))
        }
    }
}

fn dispatch(command: Command) -> ExitCode {
    match command {
        Command::Validate { config } => match load(&config) {
            Ok((cfg, _)) => {
                println!("{}: ok ({})", config.display(), cfg.kind.name());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config, out } => {
            let (cfg, text) = match load(&config) {
                Ok(v) => v,
                Err(code) => return code,
            };
            let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or(out);
            match execute(&cfg, &text, &root) {
                Ok(outcome) => {
                    for w in &outcome.manifest.warnings {
                        eprintln!("warning: {w}");
                    }
                    for f in &outcome.manifest.files {
                        println!("{}", outcome.dir.join(f).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(RUNTIME)
                }
            }
        }
        Command::Summarize { dir } => match summarize(&dir) {
            Ok(summary) => {
                print!("{summary}");
                if summary.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(VALIDATION)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(RUNTIME)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => {
                eprintln!("error: cannot start {n} threads: {e}");
                ExitCode::from(RUNTIME)
            }
        },
        None => dispatch(cli.command),
    }
}
