//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 invariant
//! violation.

mod commands;
pub mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::Error as CoreError;
use crate::expectation::PhaseStrategy;
use crate::operator::Window;
use config::{GammaConfig, OperatorConfig, PhaseConfig, ResonancesConfig, RunConfig, SpectrumConfig, VerifyConfig};

pub use commands::{execute, Outcome};
pub use output::{CSV_SCHEMA_VERSION, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("invariant violation: {}", .0.join("; "))]
    Invariant(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_) | CoreError::InsufficientData(_) => CliError::Config(e.to_string()),
            CoreError::AtPhase { ref source, .. } if matches!(**source, CoreError::Domain(_)) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Invariant(vec![other.to_string()]),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "amloc", version, about = "Dynamical localization numerics for the almost Mathieu operator")]
pub struct Cli {
    /// Worker threads for per-phase work (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues (and optionally eigenvectors) of one truncated operator.
    Spectrum(SpectrumArgs),
    /// Decay rate of the phase-averaged overlap sum.
    Gamma(GammaArgs),
    /// η-resonances of a phase and the decay windows between them.
    Resonances(ResonancesArgs),
    /// Runs the invariant suite; exit 3 on any failure.
    Verify(VerifyArgs),
    /// Re-runs the configuration recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Debug, Args)]
pub struct OperatorArgs {
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    /// Frequency: `golden`, `sqrt2`, or a decimal in (0, 1).
    #[arg(long, default_value = "golden")]
    pub alpha: String,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub theta: f64,
    /// Site window `n_min:n_max`.
    #[arg(long, default_value = "-100:100", allow_hyphen_values = true)]
    pub window: String,
}

impl OperatorArgs {
    fn config(&self) -> Result<OperatorConfig, CliError> {
        let w = parse_window(&self.window)?;
        Ok(OperatorConfig {
            lambda: self.lambda,
            alpha: self.alpha.clone(),
            theta: self.theta,
            n_min: w.n_min,
            n_max: w.n_max,
        })
    }
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub operator: OperatorArgs,
    /// Also write all eigenvectors as CSV.
    #[arg(long)]
    pub dump_eig: bool,
    /// Existing output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    #[arg(long, default_value_t = 2.0)]
    pub lambda: f64,
    #[arg(long, default_value = "golden")]
    pub alpha: String,
    #[arg(long, default_value = "-200:200", allow_hyphen_values = true)]
    pub window: String,
    /// Number of sampled phases.
    #[arg(long, default_value_t = 200)]
    pub phases: usize,
    /// midpoint-grid, jittered-grid or uniform-random.
    #[arg(long, default_value = "jittered-grid")]
    pub strategy: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Distances as `start:end:step` or a comma list.
    #[arg(long, default_value = "10:60:5")]
    pub k_list: String,
    /// Use the planted-profile family with this decay rate instead of the operator.
    #[arg(long)]
    pub synthetic_rate: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ResonancesArgs {
    #[arg(long, default_value = "golden")]
    pub alpha: String,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c0: f64,
    /// Scan horizon K: all |k| <= K.
    #[arg(long = "k-max", default_value_t = 100)]
    pub horizon: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub operator: OperatorArgs,
    /// Site pairs `k:l,k:l,...`; default is 50 random pairs in the inner window.
    #[arg(long, allow_hyphen_values = true)]
    pub pairs: Option<String>,
    #[arg(long, default_value_t = 100.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 200)]
    pub t_count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Output directory (defaults to the one recorded in the manifest).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_window(text: &str) -> Result<Window, CliError> {
    let (a, b) = text.split_once(':').ok_or_else(|| CliError::Config(format!("window '{text}' is not n_min:n_max")))?;
    let parse = |s: &str| s.trim().parse::<i64>().map_err(|_| CliError::Config(format!("bad window bound '{s}'")));
    Ok(Window::new(parse(a)?, parse(b)?)?)
}

fn parse_k_list(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("bad k-list '{text}'"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<u64> =
            parts.iter().map(|p| p.trim().parse::<u64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
        if nums[2] == 0 || nums[0] > nums[1] {
            return Err(bad());
        }
        return Ok((nums[0]..=nums[1]).step_by(nums[2] as usize).collect());
    }
    text.split(',').filter(|s| !s.trim().is_empty()).map(|s| s.trim().parse::<u64>().map_err(|_| bad())).collect()
}

fn parse_pairs(text: &str) -> Result<Vec<(i64, i64)>, CliError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (a, b) = item.split_once(':').ok_or_else(|| CliError::Config(format!("pair '{item}' is not k:l")))?;
            let k = a.trim().parse().map_err(|_| CliError::Config(format!("bad site '{a}'")))?;
            let l = b.trim().parse().map_err(|_| CliError::Config(format!("bad site '{b}'")))?;
            Ok((k, l))
        })
        .collect()
}

/// `count` seeded pairs inside `window`.
pub fn random_pairs(window: Window, count: usize, seed: u64) -> Vec<(i64, i64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.gen_range(window.n_min..=window.n_max), rng.gen_range(window.n_min..=window.n_max)))
        .collect()
}

/// Builds the effective configuration of a parsed command line.
pub fn resolve(command: &Command) -> Result<RunConfig, CliError> {
    let config = match command {
        Command::Spectrum(a) => RunConfig::Spectrum(SpectrumConfig {
            operator: a.operator.config()?,
            dump_eig: a.dump_eig,
            out: a.out.clone(),
        }),
        Command::Gamma(a) => {
            let w = parse_window(&a.window)?;
            RunConfig::Gamma(GammaConfig {
                operator: OperatorConfig {
                    lambda: a.lambda,
                    alpha: a.alpha.clone(),
                    theta: 0.0,
                    n_min: w.n_min,
                    n_max: w.n_max,
                },
                phases: PhaseConfig { count: a.phases, strategy: a.strategy.parse::<PhaseStrategy>()?, seed: a.seed },
                k_list: parse_k_list(&a.k_list)?,
                synthetic_rate: a.synthetic_rate,
                out: a.out.clone(),
            })
        }
        Command::Resonances(a) => RunConfig::Resonances(ResonancesConfig {
            alpha: a.alpha.clone(),
            theta: a.theta,
            eta: a.eta,
            c0: a.c0,
            horizon: a.horizon,
            out: a.out.clone(),
        }),
        Command::Verify(a) => {
            let operator = a.operator.config()?;
            let pairs = match &a.pairs {
                Some(text) => parse_pairs(text)?,
                None => random_pairs(operator.window()?.inner(), 50, a.seed),
            };
            RunConfig::Verify(VerifyConfig {
                operator,
                pairs,
                t_max: a.t_max,
                t_count: a.t_count,
                seed: a.seed,
                summation_gammas: vec![0.1, 0.5, 1.0, 2.0],
                summation_max_distance: 100,
                inject_fault: a.inject_fault,
                out: a.out.clone(),
            })
        }
        Command::Rerun(a) => {
            let text = std::fs::read_to_string(&a.manifest)?;
            let manifest: output::Manifest =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("unreadable manifest: {e}")))?;
            let mut config = manifest.run;
            if let Some(out) = &a.out {
                config.set_out(out.clone());
            }
            config
        }
    };
    config.validate()?;
    Ok(config)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve(&cli.command).and_then(|config| {
        let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        pool.install(|| execute(&config))
    });
    match result {
        Ok(outcome) => {
            println!("{}", outcome.message);
            0
        }
        Err(e) => {
            eprintln!("amloc: {e}");
            e.exit_code()
        }
    }
}
