use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use cqdsim::experiment::{load_config, scan, scan_csv, simulate, ScanParameter};
use cqdsim::segment::ExecutionMode;
use cqdsim::verify::{verify, Level};
use cqdsim::Error;

#[derive(Parser)]
#[command(name = "cqdsim", version, about = "Discrete-query simulation of continuous-time query algorithms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the built-in invariant suites.
    Verify {
        #[arg(long, default_value = "fast")]
        level: Level,
    },
    /// Run recovery trajectories for one configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        mode: Option<ExecutionMode>,
        /// Directory for report.json and trials.csv; the report goes to
        /// stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a configuration over a list of parameter values.
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// T, r-scale or epsilon.
        #[arg(long)]
        param: ScanParameter,
        /// Comma-separated values; an empty list yields the header only.
        #[arg(long)]
        values: ValueList,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Debug)]
struct ValueList(Vec<f64>);

impl std::str::FromStr for ValueList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(ValueList)
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_error = matches!(
                err.downcast_ref::<Error>(),
                Some(Error::Config { .. } | Error::SegmentCapExceeded { .. })
            );
            ExitCode::from(if config_error { EXIT_CONFIG } else { EXIT_FAILURE })
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run(command: Command) -> anyhow::Result<u8> {
    match command {
        Command::Verify { level } => {
            let report = verify(level)?;
            for check in &report.checks {
                println!("{check}");
            }
            let failed = report.failures().len();
            println!("{} checks, {} failed", report.checks.len(), failed);
            Ok(if failed == 0 { 0 } else { EXIT_FAILURE })
        }
        Command::Simulate { config, seed, trials, mode, out } => {
            let base = load_config(&config)?;
            let cfg = base.with_file(|f| {
                if let Some(seed) = seed {
                    f.seed = seed;
                }
                if let Some(trials) = trials {
                    f.trials = trials;
                }
                if let Some(mode) = mode {
                    f.mode = mode;
                }
            })?;
            let report = simulate(&cfg)?;
            match out {
                Some(dir) => {
                    write_file(&dir, "report.json", &report.to_json())?;
                    write_file(&dir, "trials.csv", &report.trials_csv())?;
                    let p = &report.parameters;
                    println!(
                        "p={} theta={} m={} k={} segments={} successes={}/{} mean_full_queries={} mean_fidelity={}",
                        p.p,
                        p.theta,
                        p.m,
                        p.k,
                        p.segments,
                        report.successes,
                        report.trials.len(),
                        report.mean_full_queries,
                        report.mean_fidelity.map_or("n/a".to_string(), |f| f.to_string())
                    );
                }
                None => print!("{}", report.to_json()),
            }
            Ok(0)
        }
        Command::Scan { config, param, values, out } => {
            let cfg = load_config(&config)?;
            let rows = scan(&cfg, param, &values.0)?;
            let csv = scan_csv(param, &rows);
            match out {
                Some(dir) => write_file(&dir, "scan.csv", &csv)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
    }
}
