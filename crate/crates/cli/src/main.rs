mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{EngineKind, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

#[derive(Parser, Debug)]
#[command(name = "blockade", version, about = "Photon-blockade correlation sweeps and data export")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `engine.kind`.
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineKind>,
    /// Overrides `trajectory.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (falls back to BLOCKADE_THREADS, then all cores).
    #[arg(long, global = true, env = "BLOCKADE_THREADS")]
    threads: Option<usize>,
    /// Output directory (overrides `output.dir`; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Describe the configured network.
    Model,
    /// Dark-state root and f_ss zero report.
    Spds,
    /// g2(tau) on the signal cavity.
    G2tau,
    /// g2(0) over the (delta, gamma) grid.
    Sweep,
    /// Signal occupation and g2(0) against drive amplitude.
    Occupation,
    /// Discrepancies of `tau,g2,stderr` files against the first one.
    Compare {
        inputs: Vec<PathBuf>,
        /// Sup-norm gate (overrides `compare.tolerance`).
        #[arg(long)]
        tolerance: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context {
        config,
        engine: cli.engine,
        seed: cli.seed,
        threads: cli.threads,
        out: OutputDir::create(dir)?,
    };
    let work = || match &cli.command {
        Command::Model => commands::model(&ctx),
        Command::Spds => commands::spds(&ctx),
        Command::G2tau => commands::g2tau(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Occupation => commands::occupation(&ctx),
        Command::Compare { inputs, tolerance } => commands::compare(&ctx, inputs, *tolerance),
    };
    blockade_core::parallel::with_threads(cli.threads, work)
        .map_err(|e| CliError::Config(format!("--threads: {e}")))?
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(manifest) => {
            let text = serde_json::to_string_pretty(&manifest).expect("json serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
