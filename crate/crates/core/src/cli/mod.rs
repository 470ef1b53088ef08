//! The `ppdiag` command line.
//!
//! ```text
//! ppdiag simulate --config <file> --out <dir>
//! ppdiag fit --events <csv> --models poisson,hawkes,mmpp,mmhp --out <dir> [--seed S]
//! ppdiag diagnose --events <csv> --model <file>... --out <dir>
//! ppdiag netdiag --events <csv> --fit <file>... --k 2 [--order <file>] --out <dir>
//! ```
//!
//! Exit codes: 0 success, 1 validation error, 2 numeric or convergence
//! error, 3 I/O error.

mod diagnose;
mod fit;
mod netdiag;
mod simulate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, EventTable, ReadOptions, SCHEMA_VERSION, TOOL_VERSION};

pub use diagnose::cmd_diagnose;
pub use fit::cmd_fit;
pub use netdiag::cmd_netdiag;
pub use simulate::cmd_simulate;

#[derive(Debug, Parser)]
#[command(name = "ppdiag", version, about = "Point-process simulation, fitting and diagnostics")]
pub struct Cli {
    /// Worker threads for per-pair and multistart loops. Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate events from a TOML scenario.
    Simulate(SimulateArgs),
    /// Fit models to an events file.
    Fit(FitArgs),
    /// Goodness-of-fit diagnostics of fitted models.
    Diagnose(DiagnoseArgs),
    /// Pair matrices and structure scores of network fits.
    Netdiag(NetdiagArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// How to read an events CSV.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EventsArgs {
    #[arg(long)]
    pub events: PathBuf,
    /// Observation horizon; defaults to the provenance file next to the
    /// events, or to the horizon stored with the models.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Node count of a network log.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Spread tied timestamps by 1e-9 instead of rejecting them.
    #[arg(long)]
    pub jitter_ties: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: EventsArgs,
    /// Comma-separated single-stream models.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Comma-separated network models: homogeneous, block, heterogeneous.
    #[arg(long, value_delimiter = ',')]
    pub network: Vec<String>,
    /// Blocks of the block network model, e.g. `1,2,3;4,5,6`.
    #[arg(long)]
    pub blocks: Option<String>,
    /// TOML file of fit options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: EventsArgs,
    /// Model files written by `fit` or `simulate`.
    #[arg(long = "model", required = true, num_args = 1..)]
    pub models: Vec<PathBuf>,
    /// Points of the intensity grid over `[0, T]`.
    #[arg(long, default_value_t = 1001)]
    pub grid_points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct NetdiagArgs {
    #[command(flatten)]
    pub input: EventsArgs,
    /// Network fit files written by `fit` or `simulate`.
    #[arg(long = "fit", required = true, num_args = 1..)]
    pub fits: Vec<PathBuf>,
    /// NMF rank.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Display order of the nodes: a permutation of 1..N.
    #[arg(long)]
    pub order: Option<PathBuf>,
    /// Seed of the NMF restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Blocks, e.g. `1,2,3;4,5,6`, for within- and between-block K-S means.
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Common head of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub tool: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Hash of the effective configuration, see [`io::config_hash`].
    pub config_hash: String,
}

impl ReportHeader {
    fn new<C: Serialize>(command: &str, seed: Option<u64>, config: &C) -> Self {
        ReportHeader {
            schema_version: SCHEMA_VERSION,
            tool: TOOL_VERSION.into(),
            command: command.into(),
            seed,
            config_hash: io::config_hash(config),
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Errors are printed to stderr.
pub fn run_from<I, T>(args: I) -> i32
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
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(n) if n >= 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cli.command))
        }
        Some(_) => Err(Error::Usage("--threads must be at least 1".into())),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::Fit(a) => cmd_fit(&a).map(|_| ()),
        Command::Diagnose(a) => cmd_diagnose(&a).map(|_| ()),
        Command::Netdiag(a) => cmd_netdiag(&a).map(|_| ()),
    }
}

fn read_input(input: &EventsArgs, horizon: Option<f64>, nodes: Option<usize>) -> Result<EventTable> {
    io::read_events(
        &input.events,
        &ReadOptions {
            horizon: input.horizon.or(horizon),
            node_count: input.nodes.or(nodes),
            jitter_ties: input.jitter_ties,
        },
    )
}

fn check_horizon(what: &Path, expected: f64, found: f64) -> Result<()> {
    if (expected - found).abs() > 1e-9 * expected.abs().max(1.0) {
        return Err(Error::validation(format!(
            "{} has horizon {found}, the events have {expected}",
            what.display()
        )));
    }
    Ok(())
}

/// File stems made unique by suffixing `_2`, `_3`, ... to repeats.
fn unique_names(names: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    names
        .into_iter()
        .map(|name| {
            let mut candidate = name.clone();
            let mut k = 2;
            while seen.contains(&candidate) {
                candidate = format!("{name}_{k}");
                k += 1;
            }
            seen.push(candidate.clone());
            candidate
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
