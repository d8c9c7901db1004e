//! The `bench` subcommands: recovery sweeps and timing runs, written as a
//! schema-versioned JSON report plus an optional flat TSV.

use std::path::PathBuf;

use clap::{Args, ValueEnum};

use ttls::bench::{self, SweepAxis, SweepSpec};
use ttls::pipeline::Method;
use ttls::Execution;

use crate::commands::infer::MethodArg;
use crate::SimArgs;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AxisArg {
    N,
    SharedFraction,
    Groups,
}

impl From<AxisArg> for SweepAxis {
    fn from(value: AxisArg) -> Self {
        match value {
            AxisArg::N => SweepAxis::N,
            AxisArg::SharedFraction => SweepAxis::SharedFraction,
            AxisArg::Groups => SweepAxis::Groups,
        }
    }
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Which parameter to vary.
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated ascending axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    replicates: usize,
    /// Methods to run in each cell.
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [MethodArg::Ttls, MethodArg::SingleTarget])]
    methods: Vec<MethodArg>,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
    /// Optional flat TSV of the rows.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Worker threads for the sweep cells (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

pub fn run_sweep(args: SweepArgs) -> anyhow::Result<()> {
    ttls::exec::configure_threads(args.threads);
    let spec = SweepSpec {
        axis: args.axis.into(),
        values: args.values.clone(),
        fixed: args.sim.to_config(),
        replicates: args.replicates,
        methods: args.methods.iter().map(|&m| Method::from(m)).collect(),
        policy: Default::default(),
        execution: if args.threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let report = bench::run_sweep(&spec)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)? + "\n")?;
    if let Some(tsv) = &args.tsv {
        std::fs::write(tsv, report.to_tsv())?;
    }
    for &method in &spec.methods {
        for &value in &spec.values {
            match report.mean_mcc(method, value) {
                Some(mean) => println!("{method} @ {value}: mean mcc {mean:.4}"),
                None => println!("{method} @ {value}: all replicates errored"),
            }
        }
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

#[derive(Args, Debug)]
pub struct TimingArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
}

pub fn run_timing(args: TimingArgs) -> anyhow::Result<()> {
    let report = bench::run_timing(&args.sim.to_config(), args.iterations)?;
    let timing = report.timing.as_ref().expect("timing reports carry a summary");
    println!(
        "{} iterations: median {:.3}s, total {:.3}s",
        timing.iterations, timing.median_seconds, timing.total_seconds
    );
    let stages = &timing.stages;
    println!(
        "stages: covariance {:.3}s, shared target {:.3}s, variance {:.3}s, qp {:.3}s, inversion {:.3}s, testing {:.3}s",
        stages.covariance,
        stages.shared_target,
        stages.variance,
        stages.qp,
        stages.inversion,
        stages.testing
    );
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)? + "\n")?;
    println!("report written to {}", args.out.display());
    Ok(())
}
