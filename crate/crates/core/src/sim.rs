//! Monte Carlo experiments comparing No-RIS, random-RIS and optimized-RIS
//! operation on paired channel draws.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{random_phases, sample_channels, ChannelSet, PhaseVector};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rate::RateReport;
use crate::solver::{optimize, optimize_covariances, Init, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    NoRis,
    RisRand,
    RisOpt,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::NoRis, Scheme::RisRand, Scheme::RisOpt];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::NoRis => "no_ris",
            Scheme::RisRand => "ris_rand",
            Scheme::RisOpt => "ris_opt",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown scheme '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PowerBudget,
    NSubbands,
    NRis,
}

/// Starting point of the optimized-RIS scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RisOptInit {
    /// Solver defaults (equal power, all-ones phases).
    Default,
    /// The converged random-RIS solution of the same trial.
    RisRand,
}

fn default_ris_opt_init() -> RisOptInit {
    RisOptInit::RisRand
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub n_trials: usize,
    pub schemes: Vec<Scheme>,
    /// Detail CSV path.
    pub output: PathBuf,
    /// Aggregate CSV path; defaults to `<output stem>_aggregate.csv`.
    #[serde(default)]
    pub aggregate_output: Option<PathBuf>,
    /// Write measured wall times instead of zeros. Makes detail rows non-reproducible.
    #[serde(default)]
    pub record_walltime: bool,
    #[serde(default = "default_ris_opt_init")]
    pub ris_opt_init: RisOptInit,
}

impl ExperimentSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::config("sweep_values must not be empty"));
        }
        if self.sweep_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("sweep_values must be strictly increasing"));
        }
        if self.schemes.is_empty() {
            return Err(Error::config("at least one scheme is required"));
        }
        for (a, sa) in self.schemes.iter().enumerate() {
            if self.schemes[..a].contains(sa) {
                return Err(Error::config(format!("scheme {sa} listed twice")));
            }
        }
        for &v in &self.sweep_values {
            self.config_at(v)?;
        }
        Ok(())
    }

    /// Base scenario with the sweep variable set to `value`.
    pub fn config_at(&self, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = self.base.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::config(format!("sweep value {v} is not a positive integer")))
            }
        };
        match self.sweep_variable {
            SweepVariable::PowerBudget => cfg.power_budget = value,
            SweepVariable::NSubbands => cfg.n_subbands = as_count(value)?,
            SweepVariable::NRis => cfg.n_ris = as_count(value)?,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn aggregate_path(&self) -> PathBuf {
        self.aggregate_output.clone().unwrap_or_else(|| {
            let stem = self.output.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
            self.output.with_file_name(format!("{stem}_aggregate.csv"))
        })
    }
}

/// One line of the detail CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub seed: u64,
    pub min_rate_bits: f64,
    pub outer_iters: usize,
    pub walltime_ms: f64,
}

/// One line of the aggregate CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: Scheme,
    pub sweep_value: f64,
    pub mean_min_rate: f64,
    pub rel_gain_vs_noris_pct: Option<f64>,
    pub rel_gain_vs_risrand_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial`; independent of sweep value and scheme so that
/// every scheme sees the same channel draw.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    splitmix64(base_seed ^ splitmix64(trial as u64))
}

/// Channel realization of a trial.
pub fn trial_channels(cfg: &ScenarioConfig, seed: u64) -> Result<ChannelSet> {
    sample_channels(cfg, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Random RIS configuration of a trial, drawn from a stream separate from the channels.
pub fn trial_random_phases(cfg: &ScenarioConfig, seed: u64) -> PhaseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    random_phases(cfg.n_ris, &mut rng)
}

struct Timed {
    solution: Solution,
    millis: f64,
}

fn timed(f: impl FnOnce() -> Result<Solution>) -> Result<Timed> {
    let start = Instant::now();
    let solution = f()?;
    Ok(Timed {
        solution,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Solution of one scheme within a paired trial.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub solution: Solution,
    pub millis: f64,
}

/// Solves every requested scheme on one shared channel draw.
pub fn solve_paired(cfg: &ScenarioConfig, schemes: &[Scheme], seed: u64, ris_opt_init: RisOptInit) -> Result<Vec<SchemeRun>> {
    let channels = trial_channels(cfg, seed)?;
    let rand_phases = trial_random_phases(cfg, seed);

    let need_rand = schemes.contains(&Scheme::RisRand)
        || (schemes.contains(&Scheme::RisOpt) && ris_opt_init == RisOptInit::RisRand);
    let ris_rand = if need_rand {
        Some(timed(|| {
            optimize_covariances(
                &channels,
                cfg,
                Init {
                    covs: None,
                    phases: Some(rand_phases.clone()),
                },
            )
        })?)
    } else {
        None
    };

    let mut runs = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let run = match scheme {
            Scheme::NoRis => timed(|| optimize_covariances(&channels.without_ris(), cfg, Init::default()))?,
            Scheme::RisRand => {
                let r = ris_rand.as_ref().expect("computed above");
                Timed {
                    solution: r.solution.clone(),
                    millis: r.millis,
                }
            }
            Scheme::RisOpt => {
                let init = match (&ris_rand, ris_opt_init) {
                    (Some(r), RisOptInit::RisRand) => Init {
                        covs: Some(r.solution.covs.clone()),
                        phases: Some(r.solution.phases.clone()),
                    },
                    _ => Init::default(),
                };
                timed(|| optimize(&channels, cfg, init))?
            }
        };
        runs.push(SchemeRun {
            scheme,
            solution: run.solution,
            millis: run.millis,
        });
    }
    Ok(runs)
}

/// Runs every requested scheme on one shared channel draw and tabulates the results.
pub fn run_paired_trial(cfg: &ScenarioConfig, schemes: &[Scheme], seed: u64, sweep_value: f64, ris_opt_init: RisOptInit, record_walltime: bool) -> Result<Vec<ResultRow>> {
    Ok(solve_paired(cfg, schemes, seed, ris_opt_init)?
        .into_iter()
        .map(|run| ResultRow {
            scheme: run.scheme,
            sweep_value,
            seed,
            min_rate_bits: run.solution.min_rate(),
            outer_iters: run.solution.trace.iterations.len(),
            walltime_ms: if record_walltime { run.millis } else { 0.0 },
        })
        .collect())
}

/// Rate report and outer iteration count of one scheme on the draw of `seed`.
pub fn trial_report(cfg: &ScenarioConfig, scheme: Scheme, seed: u64) -> Result<(RateReport, usize)> {
    let run = solve_paired(cfg, &[scheme], seed, RisOptInit::RisRand)?.remove(0);
    let iters = run.solution.trace.iterations.len();
    Ok((run.solution.report, iters))
}

/// Single scheme on the channel draw of `seed`.
pub fn run_trial(cfg: &ScenarioConfig, scheme: Scheme, seed: u64, sweep_value: f64) -> Result<ResultRow> {
    let mut rows = run_paired_trial(cfg, &[scheme], seed, sweep_value, RisOptInit::RisRand, false)?;
    Ok(rows.remove(0))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean min-rate per (sweep value, scheme) and relative gains over the baselines.
pub fn aggregate(rows: &[ResultRow], sweep_values: &[f64], schemes: &[Scheme]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for &v in sweep_values {
        let scheme_mean = |s: Scheme| {
            mean(
                rows.iter()
                    .filter(|r| r.scheme == s && r.sweep_value == v)
                    .map(|r| r.min_rate_bits),
            )
        };
        let gain = |m: f64, base: Option<f64>| base.filter(|&b| b > 0.0).map(|b| (m - b) / b * 100.0);
        let no_ris = scheme_mean(Scheme::NoRis);
        let ris_rand = scheme_mean(Scheme::RisRand);
        for &s in schemes {
            if let Some(m) = scheme_mean(s) {
                out.push(AggregateRow {
                    scheme: s,
                    sweep_value: v,
                    mean_min_rate: m,
                    rel_gain_vs_noris_pct: gain(m, no_ris),
                    rel_gain_vs_risrand_pct: gain(m, ris_rand),
                });
            }
        }
    }
    out
}

/// Runs all trials (in parallel) without touching the filesystem.
pub fn simulate(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let jobs: Vec<(f64, usize)> = spec
        .sweep_values
        .iter()
        .flat_map(|&v| (0..spec.n_trials).map(move |t| (v, t)))
        .collect();
    let chunks: Vec<Vec<ResultRow>> = jobs
        .par_iter()
        .map(|&(v, t)| {
            let cfg = spec.config_at(v)?;
            run_paired_trial(
                &cfg,
                &spec.schemes,
                trial_seed(spec.base.seed, t),
                v,
                spec.ris_opt_init,
                spec.record_walltime,
            )
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ResultRow> = chunks.into_iter().flatten().collect();
    let aggregates = aggregate(&rows, &spec.sweep_values, &spec.schemes);
    Ok(ExperimentResult { rows, aggregates })
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const DETAIL_HEADER: [&str; 6] = ["scheme", "sweep_value", "seed", "min_rate_bits", "outer_iters", "walltime_ms"];
pub const AGGREGATE_HEADER: [&str; 5] = ["scheme", "sweep_value", "mean_min_rate", "rel_gain_vs_noris_pct", "rel_gain_vs_risrand_pct"];

/// Runs the experiment and writes the detail and aggregate CSV files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let result = simulate(spec)?;
    write_rows(&spec.output, &result.rows, &DETAIL_HEADER)?;
    write_rows(&spec.aggregate_path(), &result.aggregates, &AGGREGATE_HEADER)?;
    Ok(result)
}
