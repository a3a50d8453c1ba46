use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use risbc::sim::{self, ExperimentSpec, Scheme};
use risbc::{Error, RateReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "risbc", version, about = "Max-min rate optimization for RIS-assisted MIMO OFDM broadcast channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment described by a JSON spec.
    Run {
        spec: PathBuf,
    },
    /// Run one trial of one scheme and print its rate report as JSON.
    Trial {
        /// Scenario JSON; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "ris_opt")]
        scheme: String,
        /// Channel seed; defaults to the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the randomized property self-checks.
    Validate {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct TrialOutput {
    scheme: Scheme,
    seed: u64,
    outer_iters: usize,
    report: RateReport,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run { spec } => {
            let spec = ExperimentSpec::from_json_file(&spec).map_err(|e| match e {
                Error::Io(io) => Error::Config(format!("cannot read spec: {io}")),
                other => other,
            })?;
            let result = sim::run_experiment(&spec)?;
            for a in &result.aggregates {
                println!(
                    "{:>9} {:>10} mean={:.4} vs_noris={} vs_risrand={}",
                    a.scheme,
                    a.sweep_value,
                    a.mean_min_rate,
                    a.rel_gain_vs_noris_pct.map_or("-".into(), |g| format!("{g:.1}%")),
                    a.rel_gain_vs_risrand_pct.map_or("-".into(), |g| format!("{g:.1}%")),
                );
            }
            eprintln!(
                "wrote {} and {}",
                spec.output.display(),
                spec.aggregate_path().display()
            );
            Ok(0)
        }
        Command::Trial { config, scheme, seed } => {
            let cfg = match config {
                Some(p) => ScenarioConfig::from_json_file(&p).map_err(|e| match e {
                    Error::Io(io) => Error::Config(format!("cannot read config: {io}")),
                    other => other,
                })?,
                None => ScenarioConfig::default(),
            };
            let scheme: Scheme = scheme.parse()?;
            let seed = seed.unwrap_or(cfg.seed);
            let (report, outer_iters) = sim::trial_report(&cfg, scheme, seed)?;
            let out = TrialOutput {
                scheme,
                seed,
                outer_iters,
                report,
            };
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(0)
        }
        Command::Validate { seed } => {
            let checks = risbc::validate::run_all(seed)?;
            let mut failed = 0;
            for c in &checks {
                println!("[{}] {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
