//! `varthresh simulate` and `varthresh select`.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration
//! error (clap usage errors also exit with 2).

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::dataio::{self, Preprocessing, Report, ReportFormat};
use crate::error::Error;
use crate::estimators::{EstimatorConfig, RidgeLambda};
use crate::simulation::{self, RunSettings, ScenarioSpec, DEFAULT_NOISE_SD, DEFAULT_RHO};
use crate::thresholding::{self, PenaltySpec, ThresholdMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const DEFAULT_PENALTIES: &str = "0.5:0.25,0.75:0.4,1:0.5";

#[derive(Debug, Parser)]
#[command(
    name = "varthresh",
    version,
    about = "Variable selection by penalized hard thresholding of regression coefficients"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo study over seeded synthetic datasets.
    Simulate(SimulateArgs),
    /// Threshold selection on a CSV dataset.
    Select(SelectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    Ols,
    Ridge,
    Ar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeKind {
    Step,
    Spline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatKind {
    Csv,
    Json,
}

impl From<FormatKind> for ReportFormat {
    fn from(f: FormatKind) -> Self {
        match f {
            FormatKind::Csv => ReportFormat::Csv,
            FormatKind::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Initial estimator.
    #[arg(long, value_enum, default_value = "ols")]
    pub estimator: EstimatorKind,
    /// Ridge penalty (also the adaptive ridge initializer): a number or `sqrt_n`.
    #[arg(long, default_value = "sqrt_n")]
    pub ridge_lambda: RidgeLambda,
    /// Adaptive ridge weight multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub ar_xi: f64,
    /// Adaptive ridge reweighting steps.
    #[arg(long, default_value_t = 5)]
    pub ar_steps: usize,
}

impl EstimatorArgs {
    pub fn config(&self) -> Result<EstimatorConfig, String> {
        Ok(match self.estimator {
            EstimatorKind::Ols => EstimatorConfig::Ols,
            EstimatorKind::Ridge => EstimatorConfig::Ridge {
                lambda: self.ridge_lambda,
            },
            EstimatorKind::Ar => {
                if !(self.ar_xi > 0.0 && self.ar_xi.is_finite()) {
                    return Err(format!("--ar-xi must be positive, got {}", self.ar_xi));
                }
                if self.ar_steps == 0 {
                    return Err("--ar-steps must be at least 1".into());
                }
                EstimatorConfig::AdaptiveRidge {
                    lambda: self.ridge_lambda,
                    xi: self.ar_xi,
                    steps: self.ar_steps,
                }
            }
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    /// Comma-separated penalty pairs `c:r`, with alpha(delta) = c / delta^r.
    #[arg(long, default_value = DEFAULT_PENALTIES)]
    pub penalties: String,
    /// Thresholding function.
    #[arg(long, value_enum, default_value = "step")]
    pub mode: ModeKind,
    /// Spline transition width (spline mode only).
    #[arg(long, default_value_t = thresholding::DEFAULT_SPLINE_WIDTH)]
    pub spline_h: f64,
}

impl ThresholdArgs {
    pub fn penalties(&self) -> Result<Vec<PenaltySpec>, String> {
        PenaltySpec::parse_list(&self.penalties).map_err(|e| e.to_string())
    }

    pub fn mode(&self) -> Result<ThresholdMode, String> {
        match self.mode {
            ModeKind::Step => Ok(ThresholdMode::Step),
            ModeKind::Spline if self.spline_h > 0.0 && self.spline_h.is_finite() => {
                Ok(ThresholdMode::Spline {
                    width: self.spline_h,
                })
            }
            ModeKind::Spline => Err(format!("--spline-h must be positive, got {}", self.spline_h)),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// `S1`, `S2`, or a JSON file with `beta0` (and optionally `name`, `rho`, `noise_sd`).
    #[arg(long)]
    pub scenario: String,
    /// Sample size per replication.
    #[arg(long)]
    pub n: usize,
    /// Number of covariates (required for S1/S2; must match `beta0` for a file).
    #[arg(long)]
    pub p: Option<usize>,
    /// Off-diagonal covariate correlation [default: 0.2, or the file's value].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Noise standard deviation [default: 1, or the file's value].
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Monte Carlo replications.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Base seed; replication seeds are derived from it.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads (0 = all available). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Write the aggregate report here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report format for --output.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatKind,
    /// Write per-replication outcomes (CSV) here.
    #[arg(long)]
    pub audit: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    /// Headered numeric CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    pub response: String,
    /// Columns to ignore (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub exclude: Vec<String>,
    /// Prepend a column of ones; it is thresholded like any other column.
    #[arg(long)]
    pub intercept: bool,
    /// Use the covariates as given instead of standardizing them.
    #[arg(long)]
    pub no_standardize: bool,
    /// Leave the response unstandardized.
    #[arg(long)]
    pub raw_response: bool,
    /// Add all pairwise interaction columns.
    #[arg(long)]
    pub interactions: bool,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Write the selection result here (one file per penalty pair when several are given).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report format for --output.
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatKind,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

#[derive(Debug, Deserialize)]
struct ScenarioFile {
    name: Option<String>,
    beta0: Vec<f64>,
    rho: Option<f64>,
    noise_sd: Option<f64>,
}

fn scenario_from_args(args: &SimulateArgs) -> Result<ScenarioSpec, CliError> {
    let config = |e: Error| CliError::Config(e.to_string());
    let mut spec = match args.scenario.to_ascii_uppercase().as_str() {
        "S1" | "S2" => {
            let p = args
                .p
                .ok_or_else(|| CliError::Config("--p is required for S1/S2".into()))?;
            if args.scenario.eq_ignore_ascii_case("S1") {
                ScenarioSpec::s1(args.n, p).map_err(config)?
            } else {
                ScenarioSpec::s2(args.n, p).map_err(config)?
            }
        }
        _ => {
            let path = Path::new(&args.scenario);
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read scenario file {}: {e}", path.display()))
            })?;
            let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!("bad scenario file {}: {e}", path.display()))
            })?;
            if let Some(p) = args.p {
                if p != file.beta0.len() {
                    return Err(CliError::Config(format!(
                        "--p {p} does not match the {} entries of beta0",
                        file.beta0.len()
                    )));
                }
            }
            ScenarioSpec::new(
                file.name.unwrap_or_else(|| "custom".into()),
                args.n,
                file.beta0,
                file.rho.unwrap_or(DEFAULT_RHO),
                file.noise_sd.unwrap_or(DEFAULT_NOISE_SD),
            )
            .map_err(config)?
        }
    };
    if let Some(rho) = args.rho {
        spec.rho = rho;
    }
    if let Some(sd) = args.noise_sd {
        spec.noise_sd = sd;
    }
    spec.validate().map_err(config)?;
    Ok(spec)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let spec = scenario_from_args(args)?;
    let estimator = args.estimator.config().map_err(CliError::Config)?;
    let penalties = args.threshold.penalties().map_err(CliError::Config)?;
    let mode = args.threshold.mode().map_err(CliError::Config)?;
    if args.reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    let settings = RunSettings {
        estimator,
        penalties,
        mode,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
    let runs = pool.install(|| simulation::run_scenario_grid(&spec, &settings, args.reps, args.seed))?;

    let reports: Vec<_> = runs.iter().map(|r| r.report.clone()).collect();
    println!(
        "{} n={} p={} estimator={} reps={} seed={}",
        spec.name, spec.n, spec.p, estimator, args.reps, args.seed
    );
    print!("{}", dataio::format_aggregate_table(&reports));

    if let Some(path) = &args.output {
        dataio::write_report(Report::Aggregate(&reports), path, args.format.into())?;
    }
    if let Some(path) = &args.audit {
        let all: Vec<_> = runs.iter().flat_map(|r| r.outcomes.iter().cloned()).collect();
        fs::write(path, dataio::outcomes_csv(&all)).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn output_path(base: &Path, penalty: PenaltySpec, many: bool) -> PathBuf {
    if !many {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("selection");
    let suffix = format!("_c{}_r{}", penalty.c, penalty.r);
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}{suffix}.{ext}"),
        None => format!("{stem}{suffix}"),
    };
    base.with_file_name(name)
}

pub fn cmd_select(args: &SelectArgs) -> Result<(), CliError> {
    let estimator = args.estimator.config().map_err(CliError::Config)?;
    let penalties = args.threshold.penalties().map_err(CliError::Config)?;
    let mode = args.threshold.mode().map_err(CliError::Config)?;
    let raw = dataio::load_csv(&args.input, &args.response, &args.exclude)?;
    let opts = Preprocessing {
        standardize: !args.no_standardize,
        standardize_response: !args.no_standardize && !args.raw_response,
        interactions: args.interactions,
        intercept: args.intercept,
    };
    let data = dataio::preprocess(&raw, &opts)?;
    let beta = estimator.fit(&data)?;
    if !beta.is_full_rank() {
        log::warn!(
            "design is rank deficient (rank {} < {}); using the minimum-norm fit",
            beta.rank,
            beta.len()
        );
    }
    let path = thresholding::build_empirical_path(&beta)?.with_mode(mode)?;
    let risks = thresholding::evaluate_path(&data, &beta, &path)?;

    println!(
        "n={} p={} estimator={} thresholds={}",
        data.n(),
        data.p(),
        beta.method,
        path.len()
    );
    for &penalty in &penalties {
        let profile = risks.with_penalty(penalty)?;
        let sel = thresholding::select_from_profile(&beta, profile, data.n(), penalty)?;
        let names: Vec<String> = sel
            .relevant_set
            .iter()
            .map(|&j| format!("{}({})", data.labels()[j], j + 1))
            .collect();
        println!(
            "(c, r) = ({}, {}): k_hat={} delta_hat={} |relevant|={} relevant={{{}}}",
            penalty.c,
            penalty.r,
            sel.k_hat,
            sel.delta_hat,
            sel.relevant_set.len(),
            names.join(", ")
        );
        if let Some(base) = &args.output {
            let out = output_path(base, penalty, penalties.len() > 1);
            dataio::write_report(Report::Selection(&sel), out, args.format.into())?;
        }
    }
    Ok(())
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    match &config.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Select(args) => cmd_select(args),
    }
}
