//! The `infer` subcommand: load a grouped dataset, run the estimation
//! pipeline, and write per-group edge lists, gamma reports, the consensus
//! network, and a manifest sufficient to reproduce the run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Serialize;

use ttls::inference::SelectionPolicy;
use ttls::io::{self, LoadOptions};
use ttls::pipeline::{run as run_pipeline, Method, PipelineOptions, PipelineOutput};
use ttls::Execution;

use crate::config::{ManifestCounts, RunConfig, RunManifest};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PolicyKind {
    Auto,
    Fdr,
    HcDj,
    HcLs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Ttls,
    SingleTarget,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Ttls => Method::Ttls,
            MethodArg::SingleTarget => Method::SingleTarget,
        }
    }
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Expression matrix: dense TSV/CSV (observations x variables, header
    /// row, leading observation-name column) or sparse triplet.
    #[arg(long, required_unless_present = "config")]
    matrix: Option<PathBuf>,
    /// Two-column file mapping each observation name to a group name.
    #[arg(long, required_unless_present = "config")]
    labels: Option<PathBuf>,
    /// Output directory for edge lists, gamma reports, and the manifest.
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    /// JSON run config (same keys as the manifest's "config" block);
    /// explicit flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Row-name file for sparse triplet input.
    #[arg(long)]
    row_names: Option<PathBuf>,
    /// Column-name file for sparse triplet input.
    #[arg(long)]
    col_names: Option<PathBuf>,
    /// Input is variables x observations; transpose after reading.
    #[arg(long)]
    transpose: bool,
    /// Skip per-column standardization (not recommended with raw scales).
    #[arg(long)]
    no_standardize: bool,
    /// Average single-target-shrunk covariances in the shared target
    /// instead of raw ones.
    #[arg(long)]
    pre_shrink: bool,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Edge selection policy; auto = FDR 0.05 below 1000 variables,
    /// higher criticism above.
    #[arg(long, value_enum)]
    policy: Option<PolicyKind>,
    /// FDR threshold for --policy fdr.
    #[arg(long, default_value_t = 0.05)]
    fdr_q: f64,
    /// Search-range fraction for --policy hc-dj.
    #[arg(long, default_value_t = 0.10)]
    alpha0: f64,
    /// Lower rank bound for --policy hc-ls (default 1).
    #[arg(long)]
    k0: Option<usize>,
    /// Upper rank bound for --policy hc-ls (default half the test count).
    #[arg(long)]
    k1: Option<usize>,
    /// Force the shrinkage intensities (gamma1, gamma2) instead of
    /// optimizing; both must be given.
    #[arg(long, requires = "gamma2")]
    gamma1: Option<f64>,
    #[arg(long, requires = "gamma1")]
    gamma2: Option<f64>,
    /// Echoed into the manifest; estimation itself is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores; TTLS_THREADS sets the default).
    #[arg(long)]
    threads: Option<usize>,
}

fn env_threads() -> usize {
    std::env::var("TTLS_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

impl InferArgs {
    /// Merge config file (if any) with explicit flags; flags win.
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let base = match &self.config {
            Some(path) => Some(RunConfig::from_json_file(path)?),
            None => None,
        };
        let policy = match self.policy {
            Some(PolicyKind::Auto) => Some(SelectionPolicy::Auto),
            Some(PolicyKind::Fdr) => Some(SelectionPolicy::Fdr { q: self.fdr_q }),
            Some(PolicyKind::HcDj) => Some(SelectionPolicy::HcDj {
                alpha0: self.alpha0,
            }),
            Some(PolicyKind::HcLs) => Some(SelectionPolicy::HcLs {
                k0: self.k0,
                k1: self.k1,
            }),
            None => None,
        };
        let gamma_override = match (self.gamma1, self.gamma2) {
            (Some(g1), Some(g2)) => Some((g1, g2)),
            _ => None,
        };
        let config = match base {
            Some(mut config) => {
                if let Some(matrix) = self.matrix {
                    config.matrix = matrix;
                }
                if let Some(labels) = self.labels {
                    config.labels = labels;
                }
                if let Some(out) = self.out {
                    config.output_dir = out;
                }
                if self.row_names.is_some() {
                    config.row_names = self.row_names;
                }
                if self.col_names.is_some() {
                    config.col_names = self.col_names;
                }
                if self.transpose {
                    config.transpose = true;
                }
                if self.no_standardize {
                    config.standardize = false;
                }
                if self.pre_shrink {
                    config.pre_shrink = true;
                }
                if let Some(method) = self.method {
                    config.method = method.into();
                }
                if let Some(policy) = policy {
                    config.policy = policy;
                }
                if gamma_override.is_some() {
                    config.gamma_override = gamma_override;
                }
                if let Some(seed) = self.seed {
                    config.seed = seed;
                }
                config.threads = self.threads.unwrap_or(env_threads());
                config
            }
            None => RunConfig {
                matrix: self.matrix.expect("clap enforces --matrix"),
                labels: self.labels.expect("clap enforces --labels"),
                row_names: self.row_names,
                col_names: self.col_names,
                transpose: self.transpose,
                standardize: !self.no_standardize,
                pre_shrink: self.pre_shrink,
                method: self.method.map(Method::from).unwrap_or(Method::Ttls),
                policy: policy.unwrap_or(SelectionPolicy::Auto),
                gamma_override,
                output_dir: self.out.expect("clap enforces --out"),
                seed: self.seed.unwrap_or(0),
                threads: self.threads.unwrap_or(env_threads()),
            },
        };
        config.policy.validate()?;
        Ok(config)
    }
}

#[derive(Serialize)]
struct GammaReport<'a> {
    group: &'a str,
    gamma1: f64,
    gamma2: f64,
    objective_value: f64,
    active_constraints: &'a std::collections::BTreeSet<ttls::shrinkage::ActiveConstraint>,
    degenerate: bool,
    n: usize,
    n_effective: usize,
    v_sample: f64,
    v_shared: f64,
    warnings: Vec<String>,
}

pub fn run(args: InferArgs) -> anyhow::Result<()> {
    let config = args.resolve()?;
    ttls::exec::configure_threads(config.threads);

    let dataset = io::load_dataset(
        &config.matrix,
        &config.labels,
        &LoadOptions {
            transpose: config.transpose,
            row_names: config.row_names.clone(),
            col_names: config.col_names.clone(),
        },
    )
    .with_context(|| format!("loading {}", config.matrix.display()))?;

    let options = PipelineOptions {
        method: config.method,
        standardize: config.standardize,
        pre_shrink: config.pre_shrink,
        policy: config.policy,
        gamma_override: config.gamma_override,
        execution: if config.threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let output = run_pipeline_cleanly(&dataset, &options, &config)?;

    for analysis in &output.groups {
        println!(
            "group {}: n={} n_eff={} gamma=({:.6}, {:.6}) edges={}",
            analysis.group,
            analysis.solution.n,
            analysis.solution.n_effective,
            analysis.solution.intensities.gamma1,
            analysis.solution.intensities.gamma2,
            analysis.edges.len()
        );
    }
    println!(
        "shared edges: {} (outputs in {})",
        output.shared.len(),
        config.output_dir.display()
    );
    Ok(())
}

/// Run and write everything, removing partial outputs if anything fails.
fn run_pipeline_cleanly(
    dataset: &ttls::covariance::GroupedDataset,
    options: &PipelineOptions,
    config: &RunConfig,
) -> anyhow::Result<PipelineOutput> {
    let created_dir = !config.output_dir.exists();
    std::fs::create_dir_all(&config.output_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();

    let result = (|| -> anyhow::Result<PipelineOutput> {
        let output = run_pipeline(dataset, options)?;
        let names = dataset.variable_names();

        let mut selected_edges = BTreeMap::new();
        let mut observations = BTreeMap::new();
        let mut warnings = BTreeMap::new();
        for analysis in &output.groups {
            let edges_path = config.output_dir.join(format!("edges_{}.tsv", analysis.group));
            io::write_group_edges(&edges_path, names, analysis)?;
            written.push(edges_path);

            let warning_strings: Vec<String> = analysis
                .partial
                .warnings
                .iter()
                .map(|w| w.to_string())
                .collect();
            let gamma_path = config.output_dir.join(format!("gamma_{}.json", analysis.group));
            let report = GammaReport {
                group: &analysis.group,
                gamma1: analysis.solution.intensities.gamma1,
                gamma2: analysis.solution.intensities.gamma2,
                objective_value: analysis.solution.objective_value,
                active_constraints: &analysis.solution.active_constraints,
                degenerate: analysis.solution.degenerate,
                n: analysis.solution.n,
                n_effective: analysis.solution.n_effective,
                v_sample: analysis.solution.v_sample,
                v_shared: analysis.solution.v_shared,
                warnings: warning_strings.clone(),
            };
            std::fs::write(&gamma_path, serde_json::to_string_pretty(&report)? + "\n")?;
            written.push(gamma_path);

            selected_edges.insert(analysis.group.clone(), analysis.edges.len());
            observations.insert(analysis.group.clone(), analysis.solution.n);
            if !warning_strings.is_empty() {
                warnings.insert(analysis.group.clone(), warning_strings);
            }
        }

        let shared_path = config.output_dir.join("shared_edges.tsv");
        io::write_edge_set(&shared_path, &output.shared, names)?;
        written.push(shared_path);

        let manifest = RunManifest::new(
            config.clone(),
            ManifestCounts {
                groups: dataset.n_groups(),
                variables: dataset.n_variables(),
                observations,
                selected_edges,
                shared_edges: output.shared.len(),
            },
            warnings,
        );
        let manifest_path = config.output_dir.join("run_manifest.json");
        std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        written.push(manifest_path);

        Ok(output)
    })();

    if result.is_err() {
        for path in &written {
            let _ = std::fs::remove_file(path);
        }
        if created_dir {
            let _ = std::fs::remove_dir(&config.output_dir);
        }
    }
    result
}
