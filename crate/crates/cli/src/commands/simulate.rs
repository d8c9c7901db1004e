//! The `simulate` subcommand: write a ground-truth fixture directory in the
//! same formats `infer` and `score` consume.

use std::path::PathBuf;

use clap::Args;

use ttls::io::write_truth;
use ttls::simulate::generate_joint_truth;

use crate::SimArgs;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Output directory for the fixture.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: SimulateArgs) -> anyhow::Result<()> {
    let config = args.sim.to_config();
    let truth = generate_joint_truth(&config)?;
    write_truth(&args.out, &truth)?;
    println!(
        "wrote {} groups x {} variables ({} observations each) to {}",
        config.groups,
        config.p,
        config.n,
        args.out.display()
    );
    println!(
        "edges per group: {} ({} shared, {} unique)",
        config.edges_per_group(),
        truth.shared_edges.len(),
        config.edges_per_group() - truth.shared_edges.len()
    );
    Ok(())
}
