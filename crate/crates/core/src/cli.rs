//! Command-line front end.
//!
//! Exit codes: 0 ok, 2 parse, 3 empty input, 4 non-stochastic matrix,
//! 5 non-convergence, 6 catalog mismatch. I/O failures on output use 1.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::estimator::{self, DefaultRow, EstimatorConfig, Weighting};
use crate::format::{self, fmt_sig12, FormatError};
use crate::markov::{self, Damping, MarkovError, Start, SteadyConfig, TransitionMatrix};
use crate::policy::{self, Recommendation, TierState};
use crate::sim::{self, MarkovParams, Policy, SimConfig, SimError, WorkloadSpec};
use crate::trace::{self, QueryTrace, TraceError, ViewCatalog};

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    NonStochastic(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    CatalogMismatch(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => 0,
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Empty(_) => 3,
            CliError::NonStochastic(_) => 4,
            CliError::NonConvergence(_) => 5,
            CliError::CatalogMismatch(_) => 6,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "viewmarkov",
    version,
    about = "Markov-based materialized view replacement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the initial probability matrix from a trace.
    Estimate(EstimateArgs),
    /// Compute the steady-state vector of a matrix.
    Steady(SteadyArgs),
    /// Recommend a promotion and eviction from per-tier traces.
    Recommend(RecommendArgs),
    /// Replay a workload or trace under one or more policies.
    Simulate(SimulateArgs),
    /// Check a trace or matrix file and summarise it.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct EstimatorFlags {
    #[arg(long, default_value = "uniform", value_parser = parse_default_row)]
    pub default_row: DefaultRow,
    #[arg(long, default_value = "episode_mean", value_parser = parse_weighting)]
    pub weighting: Weighting,
}

impl EstimatorFlags {
    fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            default_row: self.default_row,
            weighting: self.weighting,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    #[arg(long, default_value_t = markov::DEFAULT_TOLERANCE, value_parser = parse_tol)]
    pub tol: f64,
    #[arg(long, default_value_t = markov::DEFAULT_MAX_ITER as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_iter: u64,
    /// `off`, `auto`, or a factor in (0, 1].
    #[arg(long, value_parser = parse_damping)]
    pub damping: Option<Damping>,
    /// `unit:<view>` or `uniform`; defaults to the unit vector on the first view.
    #[arg(long)]
    pub start: Option<StartSpec>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub trace: PathBuf,
    /// Sidecar catalog fixing view order.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Solve the stationary equations directly instead of iterating.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub primary_trace: PathBuf,
    #[arg(long)]
    pub secondary_trace: PathBuf,
    #[arg(long)]
    pub catalog: PathBuf,
    #[arg(long)]
    pub capacity: usize,
    /// Comma-separated views currently in primary memory.
    #[arg(long, value_delimiter = ',')]
    pub primary: Vec<String>,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Workload description (TOML).
    #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
    pub workload: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, requires = "trace")]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub capacity: usize,
    #[arg(long, value_delimiter = ',')]
    pub primary: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "markov")]
    pub policy: Vec<PolicyArg>,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub retrain_interval: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverFlags,
    #[command(flatten)]
    pub estimator: EstimatorFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-interval hit rates; with several policies one file per policy.
    #[arg(long)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, required_unless_present = "matrix")]
    pub trace: Option<PathBuf>,
    #[arg(long, requires = "trace")]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StartSpec {
    Unit(String),
    Uniform,
}

impl FromStr for StartSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(StartSpec::Uniform),
            _ => match s.strip_prefix("unit:") {
                Some(view) if !view.is_empty() => Ok(StartSpec::Unit(view.to_owned())),
                _ => Err(format!("expected `unit:<view>` or `uniform`, got `{s}`")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyArg(pub Policy);

impl FromStr for PolicyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse()
            .map(PolicyArg)
            .map_err(|e: SimError| e.to_string())
    }
}

fn parse_default_row(s: &str) -> Result<DefaultRow, String> {
    match s {
        "uniform" => Ok(DefaultRow::Uniform),
        "self_loop" => Ok(DefaultRow::SelfLoop),
        _ => Err(format!("expected `uniform` or `self_loop`, got `{s}`")),
    }
}

fn parse_weighting(s: &str) -> Result<Weighting, String> {
    match s {
        "episode_mean" => Ok(Weighting::EpisodeMean),
        "transition_counts" => Ok(Weighting::TransitionCounts),
        _ => Err(format!(
            "expected `episode_mean` or `transition_counts`, got `{s}`"
        )),
    }
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 && t.is_finite() => Ok(t),
        _ => Err(format!("tolerance must be a positive number, got `{s}`")),
    }
}

const AUTO_DAMPING: f64 = 0.85;

fn parse_damping(s: &str) -> Result<Damping, String> {
    match s {
        "off" => Ok(Damping::Off),
        "auto" => Ok(Damping::Auto(AUTO_DAMPING)),
        _ => match s.parse::<f64>() {
            Ok(d) if d > 0.0 && d <= 1.0 => Ok(Damping::Fixed(d)),
            _ => Err(format!(
                "damping must be `off`, `auto`, or in (0, 1], got `{s}`"
            )),
        },
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn trace_error(path: &Path, e: TraceError) -> CliError {
    let msg = format!("{}: {e}", path.display());
    match e {
        TraceError::UnknownView { .. } => CliError::CatalogMismatch(msg),
        _ => CliError::Parse(msg),
    }
}

fn format_error(path: &Path, e: FormatError) -> CliError {
    let msg = format!("{}: {e}", path.display());
    match e {
        FormatError::Matrix(
            MarkovError::NonStochasticMatrix { .. } | MarkovError::EntryOutOfRange { .. },
        ) => CliError::NonStochastic(msg),
        _ => CliError::Parse(msg),
    }
}

fn markov_error(e: MarkovError) -> CliError {
    match e {
        MarkovError::NonStochasticMatrix { .. } | MarkovError::EntryOutOfRange { .. } => {
            CliError::NonStochastic(e.to_string())
        }
        MarkovError::ReducibleChain => {
            CliError::NonConvergence(format!("{e}; retry with --damping (e.g. --damping 0.85)"))
        }
        _ => CliError::Parse(e.to_string()),
    }
}

fn load_catalog(path: &Path) -> Result<ViewCatalog, CliError> {
    trace::parse_catalog(&read(path)?)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn load_trace(path: &Path, catalog: Option<&ViewCatalog>) -> Result<QueryTrace, CliError> {
    let bytes = read(path)?;
    match catalog {
        Some(c) => trace::parse_trace_with_catalog(&bytes, c),
        None => trace::parse_trace(&bytes),
    }
    .map_err(|e| trace_error(path, e))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn resolve_start(
    spec: Option<&StartSpec>,
    catalog: &ViewCatalog,
    default: usize,
) -> Result<Start, CliError> {
    match spec {
        None => Ok(Start::Unit(default)),
        Some(StartSpec::Uniform) => Ok(Start::Uniform),
        Some(StartSpec::Unit(name)) => catalog.index_of(name).map(Start::Unit).ok_or_else(|| {
            CliError::CatalogMismatch(format!("start view `{name}` is not in the catalog"))
        }),
    }
}

fn resolve_primary(names: &[String], catalog: &ViewCatalog) -> Result<Vec<usize>, CliError> {
    names
        .iter()
        .map(|n| {
            catalog.index_of(n).ok_or_else(|| {
                CliError::CatalogMismatch(format!("view `{n}` is not in the catalog"))
            })
        })
        .collect()
}

fn steady_config(
    flags: &SolverFlags,
    default_damping: Damping,
    start: Start,
    exact: bool,
) -> SteadyConfig {
    SteadyConfig {
        tol: flags.tol,
        max_iter: flags.max_iter as usize,
        damping: flags.damping.unwrap_or(default_damping),
        start,
        exact,
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing primary output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Info(e.to_string())
        }
        _ => CliError::Parse(
            e.to_string()
                .trim_start_matches("error: ")
                .trim_end()
                .to_owned(),
        ),
    })?;
    match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Steady(a) => cmd_steady(&a, out),
        Command::Recommend(a) => cmd_recommend(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Validate(a) => cmd_validate(&a, out),
    }
}

pub fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let catalog = args.catalog.as_deref().map(load_catalog).transpose()?;
    let trace = load_trace(&args.trace, catalog.as_ref())?;
    if trace.is_empty() {
        return Err(CliError::Empty(format!(
            "{}: trace has no events",
            args.trace.display()
        )));
    }
    let matrix = estimator::estimate(&trace, args.estimator.config())
        .expect("parsed traces only reference catalog views");
    let text = format::write_matrix_csv(trace.catalog(), &matrix.to_f64_rows());
    emit(out, args.out.as_deref(), &text)
}

pub fn cmd_steady(args: &SteadyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (catalog, matrix) = format::parse_matrix_csv(&read(&args.matrix)?)
        .map_err(|e| format_error(&args.matrix, e))?;
    if catalog.is_empty() {
        return Err(CliError::Empty(format!(
            "{}: matrix has no views",
            args.matrix.display()
        )));
    }
    let start = resolve_start(args.solver.start.as_ref(), &catalog, 0)?;
    let config = steady_config(&args.solver, Damping::Off, start, args.exact);
    let solved = markov::solve(&matrix, &config).map_err(markov_error)?;
    let r = &solved.result;
    if !r.converged {
        return Err(CliError::NonConvergence(format!(
            "no steady state after {} iterations (residual {}); retry with --damping (e.g. --damping 0.85)",
            r.iterations,
            fmt_sig12(r.residual)
        )));
    }
    let mut text = format::write_vector(&catalog, &r.vector);
    if let Some(d) = solved.damping {
        text.push_str(&format!("# damping: {}\n", fmt_sig12(d)));
    }
    if args.exact {
        text.push_str("# method: exact\n");
    } else {
        text.push_str(&format!(
            "# iterations: {}\n# residual: {}\n",
            r.iterations,
            fmt_sig12(r.residual)
        ));
    }
    emit(out, args.out.as_deref(), &text)
}

/// Steady state of the chain estimated from one tier's trace.
fn tier_vector(trace: &QueryTrace, args: &RecommendArgs) -> Result<markov::StateVector, CliError> {
    let matrix = estimator::estimate(trace, args.estimator.config())
        .expect("parsed traces only reference catalog views")
        .to_transition_matrix();
    let first = trace.events()[0].view;
    let start = resolve_start(args.solver.start.as_ref(), trace.catalog(), first)?;
    let config = steady_config(&args.solver, Damping::Auto(AUTO_DAMPING), start, false);
    let solved = markov::solve(&matrix, &config).map_err(markov_error)?;
    if !solved.result.converged {
        return Err(CliError::NonConvergence(format!(
            "no steady state after {} iterations (residual {}); retry with --damping",
            solved.result.iterations,
            fmt_sig12(solved.result.residual)
        )));
    }
    Ok(solved.result.vector)
}

pub fn cmd_recommend(args: &RecommendArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let catalog = load_catalog(&args.catalog)?;
    let primary_trace = load_trace(&args.primary_trace, Some(&catalog))?;
    let secondary_trace = load_trace(&args.secondary_trace, Some(&catalog))?;
    let primary = resolve_primary(&args.primary, &catalog)?;
    let tier = TierState::new(catalog.clone(), primary, args.capacity)
        .map_err(|e| CliError::Parse(e.to_string()))?;

    let rec = if secondary_trace.is_empty() || tier.secondary().is_empty() || args.capacity == 0 {
        Recommendation::NO_ACTION
    } else {
        let pi_secondary = tier_vector(&secondary_trace, args)?;
        let pi_primary = if tier.is_full() {
            if primary_trace.is_empty() {
                return Err(CliError::Empty(format!(
                    "{}: primary trace is empty but primary memory is full",
                    args.primary_trace.display()
                )));
            }
            tier_vector(&primary_trace, args)?
        } else {
            markov::StateVector::uniform(catalog.len())
        };
        policy::recommend(&pi_secondary, &pi_primary, &tier)
            .expect("vectors are sized to the shared catalog")
    };
    emit(
        out,
        args.out.as_deref(),
        &format!("{}\n", rec.to_line(&catalog)),
    )
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkloadFile {
    views: Vec<String>,
    transitions: Vec<Vec<f64>>,
    n_queries: usize,
    start_view: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkloadError {
    #[error("workload file: {0}")]
    Syntax(String),
    #[error("workload views: {0}")]
    Views(TraceError),
    #[error("workload start view `{0}` is not listed in views")]
    UnknownStart(String),
    #[error("workload transitions: {0}")]
    Matrix(MarkovError),
}

/// Parses a workload description:
///
/// ```toml
/// views = ["V1", "V2", "V3"]
/// transitions = [[0.5, 0.25, 0.25], [0.2, 0.7, 0.1], [0.1, 0.1, 0.8]]
/// n_queries = 50000
/// start_view = "V1"   # optional, defaults to the first view
/// ```
pub fn parse_workload(input: &[u8], seed: u64) -> Result<WorkloadSpec, WorkloadError> {
    let text = std::str::from_utf8(input).map_err(|e| WorkloadError::Syntax(e.to_string()))?;
    let file: WorkloadFile =
        toml::from_str(text).map_err(|e| WorkloadError::Syntax(e.to_string()))?;
    let catalog = ViewCatalog::from_names(file.views).map_err(WorkloadError::Views)?;
    if catalog.is_empty() {
        return Err(WorkloadError::Syntax(
            "at least one view is required".into(),
        ));
    }
    let matrix = TransitionMatrix::from_rows(&file.transitions).map_err(WorkloadError::Matrix)?;
    if matrix.dim() != catalog.len() {
        return Err(WorkloadError::Matrix(MarkovError::DimensionMismatch {
            expected: catalog.len(),
            found: matrix.dim(),
        }));
    }
    let start = match file.start_view {
        Some(name) => catalog
            .index_of(&name)
            .ok_or(WorkloadError::UnknownStart(name))?,
        None => 0,
    };
    Ok(
        WorkloadSpec::new(catalog, matrix, file.n_queries, seed, start)
            .expect("dimensions and start view checked above"),
    )
}

fn series_path(base: &Path, policy: Policy, several: bool) -> PathBuf {
    if !several {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series");
    let name = match base.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{policy}.{ext}"),
        None => format!("{stem}.{policy}"),
    };
    base.with_file_name(name)
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let trace = match (&args.workload, &args.trace) {
        (Some(path), _) => {
            let spec = parse_workload(&read(path)?, args.seed).map_err(|e| {
                let msg = format!("{}: {e}", path.display());
                match e {
                    WorkloadError::Matrix(
                        MarkovError::NonStochasticMatrix { .. }
                        | MarkovError::EntryOutOfRange { .. },
                    ) => CliError::NonStochastic(msg),
                    _ => CliError::Parse(msg),
                }
            })?;
            sim::generate_workload(&spec)
        }
        (None, Some(path)) => {
            let catalog = args.catalog.as_deref().map(load_catalog).transpose()?;
            load_trace(path, catalog.as_ref())?
        }
        (None, None) => unreachable!("clap requires --workload or --trace"),
    };
    let catalog = trace.catalog().clone();
    let primary = resolve_primary(&args.primary, &catalog)?;
    let tier = TierState::new(catalog, primary, args.capacity)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    let config = SimConfig {
        tier,
        policy: Policy::Markov,
        retrain_interval: args.retrain_interval as usize,
        markov: MarkovParams {
            tol: args.solver.tol,
            max_iter: args.solver.max_iter as usize,
            damping: args.solver.damping.unwrap_or(Damping::Auto(AUTO_DAMPING)),
            estimator: args.estimator.config(),
            ..MarkovParams::default()
        },
        seed: args.seed,
    };
    let policies: Vec<Policy> = args.policy.iter().map(|p| p.0).collect();
    let reports = sim::compare_policies(&trace, &config, &policies).map_err(|e| match e {
        SimError::Markov(m) => markov_error(m),
        other => CliError::Parse(other.to_string()),
    })?;

    emit(
        out,
        args.out.as_deref(),
        &sim::report_csv(reports.iter().map(|(_, r)| r)),
    )?;
    if let Some(base) = &args.series {
        for (policy, report) in &reports {
            let path = series_path(base, *policy, reports.len() > 1);
            fs::write(&path, sim::interval_csv(report))
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(())
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut text = String::new();
    if let Some(path) = &args.trace {
        let catalog = args.catalog.as_deref().map(load_catalog).transpose()?;
        let trace = load_trace(path, catalog.as_ref())?;
        let extraction = estimator::extract_episodes(&trace);
        text.push_str(&format!(
            "trace ok: {} events, {} views, {} episodes, {} trailing hits discarded\n",
            trace.len(),
            trace.catalog().len(),
            extraction.episodes.len(),
            extraction.discarded
        ));
    }
    if let Some(path) = &args.matrix {
        let (catalog, matrix) =
            format::parse_matrix_csv(&read(path)?).map_err(|e| format_error(path, e))?;
        text.push_str(&format!(
            "matrix ok: {} views, row-stochastic, irreducible={}\n",
            catalog.len(),
            markov::check_irreducible(&matrix)
        ));
    }
    emit(out, None, &text)
}
