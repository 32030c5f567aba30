//! Configuration, pipelines and artifacts for the `fblab` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;
pub mod presets;
pub mod sweep;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Setup};

pub const EXIT_OK: u8 = 0;
pub const EXIT_SOLVER: u8 = 1;
pub const EXIT_VERIFICATION: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_SCHEMA: u8 = 65;
pub const EXIT_IO: u8 = 66;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("solver: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Schema(_) => EXIT_SCHEMA,
            CliError::Io(_) => EXIT_IO,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fblab", version, about = "Regularized free-boundary problems: solve, verify, sweep")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `run.out`; default `fblab-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized checks (overrides `run.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mountain pass, ε-continuation, free-boundary extraction and verification.
    Solve(RunArgs),
    /// One solve per value of the config's `[sweep]` axis.
    Sweep(RunArgs),
    /// Re-run verification on the fields of an earlier solve.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Directory of the earlier solve.
        #[arg(long)]
        fields: PathBuf,
    },
    /// Write the shipped preset configs (to stdout without `--out`).
    DumpPresets {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(args: &RunArgs) -> Result<(Setup, PathBuf), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut config = RunConfig::from_toml_str(&text)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("fblab-out"));
    Ok((config.validate()?, out))
}

fn dump_presets(out: Option<&Path>) -> Result<u8, CliError> {
    for c in presets::all() {
        let text = c.to_toml_string();
        match out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                let path = dir.join(format!("{}.toml", c.name));
                fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            None => println!("# preset: {}\n{text}", c.name),
        }
    }
    Ok(EXIT_OK)
}

fn dispatch(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Solve(args) => {
            let (setup, out) = load(&args)?;
            Ok(pipeline::run_solve(&setup, &out)?.exit_code)
        }
        Command::Sweep(args) => {
            let (setup, out) = load(&args)?;
            let threads = args
                .threads
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let (rows, code) = sweep::run_sweep(&setup, &out, threads)?;
            if let Some(row) = rows.iter().find(|r| r.first_breakdown) {
                eprintln!("first breakdown at {} = {}", row.parameter, row.value);
            }
            Ok(code)
        }
        Command::Verify { run, fields } => {
            let (setup, out) = load(&run)?;
            pipeline::run_verify(&setup, &fields, &out)
        }
        Command::DumpPresets { out } => dump_presets(out.as_deref()),
    }
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("fblab: {e}");
            e.exit_code()
        }
    }
}
