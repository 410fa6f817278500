//! `sojourn`: command-line driver for geodesic sojourn relations, Schrödinger
//! propagation and wavefront detection.
//!
//! Exit codes: 0 success, 1 numerical or property failure, 2 usage or
//! configuration error.

mod commands;
mod config;
mod example;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::ScenarioConfig;
use output::Output;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError {
            code: 2,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> CliError {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    /// Configuration errors from the library are usage errors; everything
    /// else is a numerical failure.
    pub fn from_core(context: &str, e: sojourn_core::Error) -> CliError {
        let message = format!("{context}: {e}");
        match e {
            sojourn_core::Error::Config(_) => CliError::usage(message),
            _ => CliError::failure(message),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "sojourn", version, about = "Sojourn relations, propagation and wavefront detection")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for batch operations (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed for random sample starts.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate geodesics from the `[samples]` starts.
    Geodesic,
    /// Sojourn relations and contact check for the `[samples]` starts.
    Sojourn,
    /// Contact-form pullback check only.
    ContactCheck,
    /// Evolve `[initial]` on `[grid]` to the `[evolution]` times.
    Evolve,
    /// Detect WF / WF_sc / WF_qsc of a stored field.
    Wavefront {
        /// Field file written by `evolve`.
        #[arg(long)]
        field: PathBuf,
        /// Apply `e^{-iα|z|²/2}` before the WF_sc and WF_qsc detectors.
        #[arg(long)]
        gauge: Option<f64>,
    },
    /// Run a complete worked example; `--config` overrides its sections.
    Example {
        #[arg(value_enum)]
        name: ExampleName,
    },
    /// Classify `[samples]` (or the `[nontrap]` grid) as escaped or undecided.
    Nontrap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    EuclidDelta,
    Airy,
}

fn configure_threads(n: usize) -> CliResult<()> {
    if n == 0 {
        return Ok(());
    }
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        eprintln!("note: built without the `parallel` feature; --threads {n} has no effect");
        Ok(())
    }
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads(cli.threads)?;
    let loaded = match &cli.config {
        Some(p) => Some(ScenarioConfig::load(p)?),
        None => None,
    };
    let cfg = match &cli.command {
        Command::Example { name } => example::defaults(*name).overlay(loaded.unwrap_or_else(ScenarioConfig::empty)),
        _ => loaded.ok_or_else(|| CliError::usage("this command needs --config <FILE>"))?,
    };
    let out_section = cfg.output();
    let dir = cli
        .out_dir
        .clone()
        .or(out_section.directory.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let out = Output::create(dir, out_section.formats)?;
    out.manifest("scenario.toml", &cfg.to_toml())?;
    match cli.command {
        Command::Geodesic => commands::geodesic(&cfg, cli.seed, &out),
        Command::Sojourn => commands::sojourn(&cfg, cli.seed, &out),
        Command::ContactCheck => commands::contact(&cfg, cli.seed, &out),
        Command::Evolve => commands::evolve(&cfg, &out),
        Command::Wavefront { field, gauge } => commands::wavefront(&cfg, &field, gauge, &out),
        Command::Example { name } => example::run(name, &cfg, &out),
        Command::Nontrap => commands::nontrap(&cfg, cli.seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
