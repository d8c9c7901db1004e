//! `ttls` — joint Gaussian graphical model estimation from grouped
//! expression matrices, plus the simulator and benchmark harness behind it.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "ttls",
    version,
    about = "Joint graphical model estimation via two-target linear covariance shrinkage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate per-group networks and the shared consensus network.
    Infer(Box<commands::infer::InferArgs>),
    /// Generate a joint-network ground truth as a fixture directory.
    Simulate(commands::simulate::SimulateArgs),
    /// Recovery sweeps and timing runs on simulated data.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Score a predicted edge list against a reference edge list.
    Score(commands::score::ScoreArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Vary one axis (n, shared-fraction, groups) and record recovery MCC.
    Sweep(commands::bench::SweepArgs),
    /// Time the full estimation pipeline, with a per-stage breakdown.
    Timing(commands::bench::TimingArgs),
}

/// Simulation parameters shared by `simulate` and `bench`.
#[derive(Args, Clone, Debug)]
struct SimArgs {
    /// Variable (gene) count.
    #[arg(long)]
    p: usize,
    /// Observations (cells) per group.
    #[arg(long)]
    n: usize,
    /// Number of groups.
    #[arg(long, short = 'g')]
    groups: usize,
    /// Fraction of each group's edges drawn from the shared skeleton.
    #[arg(long, default_value_t = 0.4)]
    shared_fraction: f64,
    /// Target average node degree.
    #[arg(long, default_value_t = 2.0)]
    edges_per_node: f64,
    /// Smallest generated partial-correlation magnitude.
    #[arg(long, default_value_t = 0.1)]
    magnitude_low: f64,
    /// Largest generated partial-correlation magnitude.
    #[arg(long, default_value_t = 0.4)]
    magnitude_high: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SimArgs {
    fn to_config(&self) -> ttls::simulate::SimulationConfig {
        ttls::simulate::SimulationConfig {
            p: self.p,
            n: self.n,
            groups: self.groups,
            shared_fraction: self.shared_fraction,
            edges_per_node: self.edges_per_node,
            seed: self.seed,
            magnitude: (self.magnitude_low, self.magnitude_high),
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ttls::Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(ttls::Error::InvalidConfig(_)) | Some(ttls::Error::InvalidRange { .. }) => 1,
        Some(_) => 2,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Infer(args) => commands::infer::run(*args),
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Bench(BenchCommand::Sweep(args)) => commands::bench::run_sweep(args),
        Command::Bench(BenchCommand::Timing(args)) => commands::bench::run_timing(args),
        Command::Score(args) => commands::score::run(args),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code_for(&err);
            let category = match code {
                1 => "usage",
                3 => "numerical",
                _ => "data",
            };
            eprintln!("error[{category}]: {err:#}");
            ExitCode::from(code)
        }
    }
}
