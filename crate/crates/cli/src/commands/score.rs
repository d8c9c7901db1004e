//! The `score` subcommand: Matthews correlation of a predicted edge list
//! against a reference, both as named TSV edge lists.

use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;

use ttls::inference::{Edge, EdgeSet};
use ttls::io::read_named_edges;
use ttls::simulate::mcc;

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Predicted edge list (gene_i, gene_j, weight columns).
    #[arg(long)]
    predicted: PathBuf,
    /// Reference edge list in the same format.
    #[arg(long)]
    truth: PathBuf,
    /// Total variable count (fixes the universe of possible pairs).
    #[arg(long)]
    p: usize,
}

fn to_edge_set(
    name: &str,
    edges: &[(String, String, f64)],
    index: &mut HashMap<String, usize>,
    p: usize,
) -> anyhow::Result<EdgeSet> {
    let mut resolved = Vec::with_capacity(edges.len());
    for (a, b, weight) in edges {
        let mut id = |name: &String| {
            let next = index.len();
            *index.entry(name.clone()).or_insert(next)
        };
        let (i, j) = (id(a), id(b));
        resolved.push(Edge {
            i,
            j,
            weight: *weight,
        });
    }
    if index.len() > p {
        bail!(
            "edge lists name {} distinct variables but --p is {p}",
            index.len()
        );
    }
    Ok(EdgeSet::new(name, resolved)?)
}

pub fn run(args: ScoreArgs) -> anyhow::Result<()> {
    let predicted = read_named_edges(&args.predicted)
        .with_context(|| format!("reading {}", args.predicted.display()))?;
    let truth = read_named_edges(&args.truth)
        .with_context(|| format!("reading {}", args.truth.display()))?;

    let mut index = HashMap::new();
    let predicted_set = to_edge_set("predicted", &predicted, &mut index, args.p)?;
    let truth_set = to_edge_set("truth", &truth, &mut index, args.p)?;
    let report = mcc(&predicted_set, &truth_set, args.p);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
