//! `twoctl`: scenario-driven command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoupling::{design_decoupling, design_with_gain, DecouplingTarget, DesignResult, FreeParams, Thresholds};
use crate::error::Error;
use crate::polyrat::RationalFunction;
use crate::scenario::{freq_report, tfs_report, ConfigError, Scenario, ScenarioConfig, SCENARIO_SCHEMA};
use crate::simulate::{hex_digest, simulate, SimMetadata};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_SIMULATION: i32 = 4;

/// Environment variable holding `ZERO[,NONZERO]` decoupling thresholds.
pub const TOL_ENV: &str = "TWOCTL_TOL";

#[derive(Debug, Parser)]
#[command(name = "twoctl", version, about = "Two-way coded feedback loops under injection attacks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Six closed-loop transfer functions, stability and decoupling flags.
    Tfs(ReportArgs),
    /// Co-design a static gain and coding matrix for one attack channel.
    Design(DesignArgs),
    /// Time-domain run written as CSV plus a JSON metadata sidecar.
    Simulate(SimulateArgs),
    /// H-infinity norms and band-limited Bode integrals of the six maps.
    Freq(FreqArgs),
    /// Run `simulate` and `tfs` for many scenarios in parallel.
    Sweep(SweepArgs),
}

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; defaults to `outputs.report`, then stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    W,
    Z,
    Both,
}

impl From<TargetArg> for DecouplingTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::W => DecouplingTarget::ForwardAttackW,
            TargetArg::Z => DecouplingTarget::FeedbackAttackZ,
            TargetArg::Both => DecouplingTarget::Both,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct DesignArgs {
    /// Plant as `{"num":[...],"den":[...]}`.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub plant: Option<String>,
    /// Scenario whose plant is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub target: TargetArg,
    /// Use this static gain instead of searching for one.
    #[arg(long, allow_hyphen_values = true)]
    pub gain: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// CSV path; defaults to `outputs.csv`, then stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metadata path; defaults to `outputs.metadata`, then the CSV path
    /// with a `.meta.json` extension.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub allow_unstable: bool,
    /// Record the wall-clock time in the metadata.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, clap::Args)]
pub struct FreqArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Upper frequency of the Bode integral; overrides `freq.omega_max`.
    #[arg(long)]
    pub omega_max: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    /// Scenario files.
    #[arg(long = "config", required = true, num_args = 1..)]
    pub configs: Vec<PathBuf>,
    /// Directory receiving `<stem>.csv`, `<stem>.meta.json` and
    /// `<stem>.tfs.json` per scenario.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub allow_unstable: bool,
    #[arg(long)]
    pub timestamp: bool,
}

/// Failure carrying the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::new(EXIT_CONFIG, e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Metadata sidecar written next to a simulation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config_hash: String,
    #[serde(flatten)]
    pub sim: SimMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub config: String,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn schema_validator() -> &'static jsonschema::Validator {
    static VALIDATOR: OnceLock<jsonschema::Validator> = OnceLock::new();
    VALIDATOR.get_or_init(|| {
        let schema: serde_json::Value = serde_json::from_str(SCENARIO_SCHEMA).expect("schema is valid JSON");
        jsonschema::validator_for(&schema).expect("schema compiles")
    })
}

/// Parses, schema-validates and resolves a scenario document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError {
        path: String::new(),
        message: format!("invalid JSON: {e}"),
    })?;
    if let Some(err) = schema_validator().iter_errors(&value).next() {
        return Err(ConfigError {
            path: err.instance_path().to_string(),
            message: format!("{err} (schema {})", err.schema_path()),
        });
    }
    serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e
            .path()
            .iter()
            .filter_map(|seg| match seg {
                serde_path_to_error::Segment::Seq { index } => Some(format!("/{index}")),
                serde_path_to_error::Segment::Map { key } => Some(format!("/{key}")),
                serde_path_to_error::Segment::Enum { variant } => Some(format!("/{variant}")),
                serde_path_to_error::Segment::Unknown => None,
            })
            .collect();
        ConfigError { path, message: e.into_inner().to_string() }
    })
}

/// Reads and validates a scenario file. Relative output paths are resolved
/// against the file's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    let mut config = parse_config(&text).map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut config.outputs.csv, &mut config.outputs.metadata, &mut config.outputs.report]
        .into_iter()
        .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    config
        .into_scenario()
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

/// Hash of the scenario content, independent of formatting and of where
/// outputs go.
pub fn config_hash(config: &ScenarioConfig) -> String {
    let mut c = config.clone();
    c.outputs = Default::default();
    hex_digest(&serde_json::to_vec(&c).expect("configs serialize"))
}

pub fn thresholds_from_env() -> Result<Thresholds, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(text) => Thresholds::parse(&text).map_err(|e| CliError::new(EXIT_CONFIG, format!("{TOL_ENV}: {e}"))),
        Err(std::env::VarError::NotPresent) => Ok(Thresholds::default()),
        Err(e) => Err(CliError::new(EXIT_CONFIG, format!("{TOL_ENV}: {e}"))),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::new(EXIT_IO, format!("stdout: {e}")))
        }
    }
}

fn model_error(e: Error) -> CliError {
    CliError::new(EXIT_CONFIG, e.to_string())
}

pub fn cmd_tfs(args: &ReportArgs, th: &Thresholds) -> Result<(), CliError> {
    let sc = load_scenario(&args.config)?;
    let report = tfs_report(&sc.model, th).map_err(model_error)?;
    emit(&to_json(&report), args.out.as_deref().or(sc.config.outputs.report.as_deref()))
}

pub fn cmd_freq(args: &FreqArgs, th: &Thresholds) -> Result<(), CliError> {
    let sc = load_scenario(&args.config)?;
    let omega_max = args.omega_max.unwrap_or(sc.config.freq.omega_max);
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(CliError::new(EXIT_CONFIG, "--omega-max must be positive"));
    }
    let report = freq_report(&sc.model, omega_max, th).map_err(model_error)?;
    emit(&to_json(&report), args.out.as_deref())
}

/// Prints the design and returns whether it is feasible.
pub fn cmd_design(args: &DesignArgs) -> Result<bool, CliError> {
    let plant: RationalFunction = match (&args.plant, &args.config) {
        (Some(text), _) => serde_json::from_str(text)
            .map_err(|e| CliError::new(EXIT_CONFIG, format!("--plant: {e}")))?,
        (None, Some(path)) => load_scenario(path)?.config.plant,
        (None, None) => return Err(CliError::new(EXIT_CONFIG, "--plant or --config is required")),
    };
    if !plant.is_proper() {
        return Err(CliError::new(EXIT_CONFIG, "--plant: plant must be proper"));
    }
    let defaults = FreeParams::default();
    let free = FreeParams {
        a: args.a.unwrap_or(defaults.a),
        b: args.b.unwrap_or(defaults.b),
        c: args.c.unwrap_or(defaults.c),
        d: args.d.unwrap_or(defaults.d),
    };
    let target = args.target.into();
    let result = match args.gain {
        Some(k) => design_with_gain(&plant, target, k, free),
        None => design_decoupling(&plant, target, free),
    }
    .map_err(model_error)?;
    emit(&to_json(&result), args.out.as_deref())?;
    Ok(matches!(result, DesignResult::Feasible { .. }))
}

fn unix_time() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Simulates a loaded scenario, writing the CSV to `csv` (stdout if `None`)
/// and the metadata to `meta` when given.
fn run_simulation(
    sc: &Scenario,
    csv: Option<&Path>,
    meta: Option<&Path>,
    allow_unstable: bool,
    timestamp: bool,
) -> Result<(), CliError> {
    let mut opts = sc.config.sim;
    opts.allow_unstable = allow_unstable;
    let result = simulate(&sc.model, &sc.inputs, &opts).map_err(|e| CliError::new(EXIT_SIMULATION, e.to_string()))?;
    let csv_text = result.to_csv_string();
    if csv_text.split([',', '\n']).any(|f| f.contains("NaN") || f.contains("inf")) {
        return Err(CliError::new(EXIT_SIMULATION, "simulation produced non-finite values"));
    }
    emit(&csv_text, csv)?;
    if let Some(meta) = meta {
        let md = RunMetadata {
            config_hash: config_hash(&sc.config),
            sim: result.metadata,
            timestamp: timestamp.then(unix_time),
        };
        emit(&to_json(&md), Some(meta))?;
    }
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let sc = load_scenario(&args.config)?;
    let csv = args.out.clone().or_else(|| sc.config.outputs.csv.clone());
    let meta = args
        .metadata
        .clone()
        .or_else(|| sc.config.outputs.metadata.clone())
        .or_else(|| csv.as_ref().map(|p| p.with_extension("meta.json")));
    for p in [&csv, &meta].into_iter().flatten() {
        if same_file(p, &args.config) {
            return Err(CliError::new(EXIT_CONFIG, format!("{}: output would overwrite the config", p.display())));
        }
    }
    run_simulation(&sc, csv.as_deref(), meta.as_deref(), args.allow_unstable, args.timestamp)
}

fn sweep_one(path: &Path, args: &SweepArgs, th: &Thresholds) -> Result<(), CliError> {
    let sc = load_scenario(path)?;
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let report = tfs_report(&sc.model, th).map_err(model_error)?;
    emit(&to_json(&report), Some(&args.out.join(format!("{stem}.tfs.json"))))?;
    run_simulation(
        &sc,
        Some(&args.out.join(format!("{stem}.csv"))),
        Some(&args.out.join(format!("{stem}.meta.json"))),
        args.allow_unstable,
        args.timestamp,
    )
}

/// Runs every scenario; the returned entries follow the input order.
pub fn cmd_sweep(args: &SweepArgs, th: &Thresholds) -> Result<Vec<SweepEntry>, CliError> {
    let mut stems = std::collections::BTreeSet::new();
    for p in &args.configs {
        let stem = p.file_stem().unwrap_or_default().to_os_string();
        if !stems.insert(stem) {
            return Err(CliError::new(
                EXIT_CONFIG,
                format!("{}: another scenario has the same file stem", p.display()),
            ));
        }
    }
    if args.jobs == Some(0) {
        return Err(CliError::new(EXIT_CONFIG, "--jobs must be at least 1"));
    }
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::new(EXIT_IO, e.to_string()))?;
    let entries = pool.install(|| {
        args.configs
            .par_iter()
            .map(|p| {
                let res = sweep_one(p, args, th);
                SweepEntry {
                    config: p.display().to_string(),
                    exit_code: res.as_ref().err().map_or(EXIT_OK, |e| e.code),
                    error: res.err().map(|e| e.message),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(entries)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Tfs(a) => cmd_tfs(a, &thresholds_from_env()?),
        Command::Freq(a) => cmd_freq(a, &thresholds_from_env()?),
        Command::Design(a) => {
            if cmd_design(a)? {
                Ok(())
            } else {
                Err(CliError::new(EXIT_INFEASIBLE, "design infeasible"))
            }
        }
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => {
            let entries = cmd_sweep(a, &thresholds_from_env()?)?;
            emit(&to_json(&entries), None)?;
            match entries.iter().find(|e| e.exit_code != EXIT_OK) {
                Some(e) => Err(CliError::new(e.exit_code, e.error.clone().unwrap_or_default())),
                None => Ok(()),
            }
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("twoctl: {e}");
            e.code
        }
    }
}
