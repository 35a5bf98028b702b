//! `seirv`: run optimal two-vaccine campaigns from a TOML scenario file.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Command;
use config::Overrides;

#[derive(Parser)]
#[command(name = "seirv", version, about = "Optimal vaccination with two vaccines (SEIRV model)")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimize one campaign and write trajectories, controls and adjoints.
    Solve(RunArgs),
    /// Re-optimize over the immunity/return-rate perturbation grid.
    SweepRates(RunArgs),
    /// Re-optimize while sweeping one efficacy.
    SweepEfficacy(RunArgs),
    /// Compare infections with only V1, both vaccines, and only V2.
    CompareInfected(RunArgs),
    /// Run the campaign without vaccination.
    Baseline(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Step size in days.
    #[arg(long)]
    dt: Option<f64>,
    /// Relative convergence tolerance of the sweep.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Weight of the new control iterate, in (0, 1].
    #[arg(long)]
    relaxation: Option<f64>,
    /// Worker threads for grids; 0 uses all cores.
    #[arg(long)]
    parallelism: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let (command, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::SweepRates(a) => (Command::SweepRates, a),
        Cmd::SweepEfficacy(a) => (Command::SweepEfficacy, a),
        Cmd::CompareInfected(a) => (Command::CompareInfected, a),
        Cmd::Baseline(a) => (Command::Baseline, a),
    };
    let overrides = Overrides {
        dt: args.dt,
        tol: args.tol,
        max_iters: args.max_iters,
        relaxation: args.relaxation,
        parallelism: args.parallelism,
    };
    match commands::run(command, &args.config, &args.out, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("seirv {}: {e:#}", command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
