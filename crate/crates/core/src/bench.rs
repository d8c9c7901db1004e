//! Recovery sweeps and timing runs over simulated joint networks.
//!
//! A sweep varies one axis (observations per group, shared-edge fraction, or
//! group count), regenerates a fresh ground truth per (value, replicate)
//! cell, runs each method end to end, and scores recovery with Matthews
//! correlation. Cells are the parallel unit; each cell's seed derives only
//! from the base seed, the value index, and the replicate, so the statistical
//! columns of a report are reproducible regardless of scheduling, and both
//! methods see the same truths (paired comparisons).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::inference::SelectionPolicy;
use crate::pipeline::{run, Method, PipelineOptions, StageTimes};
use crate::simulate::{derive_seed, generate_joint_truth, mcc, SimulationConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    SharedFraction,
    Groups,
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::N => write!(f, "n"),
            SweepAxis::SharedFraction => write!(f, "shared_fraction"),
            SweepAxis::Groups => write!(f, "groups"),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Axis values, ascending. Counts (`n`, `groups`) are given as floats
    /// and rounded.
    pub values: Vec<f64>,
    /// Baseline configuration; the axis field is overwritten per value.
    pub fixed: SimulationConfig,
    pub replicates: usize,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub policy: SelectionPolicy,
    #[serde(default)]
    pub execution: Execution,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep values are empty".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "sweep values must be strictly ascending".into(),
            ));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("need at least 1 replicate".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        self.policy.validate()?;
        self.config_for(self.values[0]).validate()
    }

    /// The simulation config for one axis value.
    pub fn config_for(&self, value: f64) -> SimulationConfig {
        let mut config = self.fixed;
        match self.axis {
            SweepAxis::N => config.n = value.round() as usize,
            SweepAxis::SharedFraction => config.shared_fraction = value,
            SweepAxis::Groups => config.groups = value.round() as usize,
        }
        config
    }
}

/// One sweep cell result (or one timing iteration).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub axis_value: f64,
    pub replicate: usize,
    pub per_group_mcc: Vec<f64>,
    pub mean_mcc: f64,
    pub wall_clock_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub cores: usize,
    pub build: String,
}

impl Environment {
    pub fn capture() -> Self {
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            cores: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            build: format!("ttls {}", env!("CARGO_PKG_VERSION")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingSummary {
    pub iterations: usize,
    pub median_seconds: f64,
    pub total_seconds: f64,
    pub stages: StageTimes,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
    pub rows: Vec<BenchRow>,
    pub environment: Environment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingSummary>,
}

impl BenchReport {
    /// Mean of `mean_mcc` over replicates for one (method, value) pair.
    /// Error rows are excluded.
    pub fn mean_mcc(&self, method: Method, axis_value: f64) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.axis_value == axis_value && r.error.is_none())
            .map(|r| r.mean_mcc)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }

    /// Flat tab-separated rendering of the rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "method\taxis_value\treplicate\tmean_mcc\twall_clock_seconds\tper_group_mcc\terror\n",
        );
        for row in &self.rows {
            let per_group = row
                .per_group_mcc
                .iter()
                .map(|v| crate::io::fmt_float(*v))
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                row.method,
                crate::io::fmt_float(row.axis_value),
                row.replicate,
                crate::io::fmt_float(row.mean_mcc),
                crate::io::fmt_float(row.wall_clock_seconds),
                per_group,
                row.error.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

/// Run a sweep. A failed cell is recorded as an error row and the sweep
/// continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<BenchReport> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.replicates).map(move |r| (v, r)))
        .collect();

    let cell_rows: Vec<Vec<BenchRow>> = map_indices(spec.execution, cells.len(), |idx| {
        let (value_idx, replicate) = cells[idx];
        let value = spec.values[value_idx];
        let mut config = spec.config_for(value);
        config.seed = derive_seed(
            spec.fixed.seed,
            (value_idx as u64) << 32 | replicate as u64,
        );
        run_cell(spec, config, value, replicate)
    });

    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "sweep".into(),
        axis: Some(spec.axis),
        rows: cell_rows.into_iter().flatten().collect(),
        environment: Environment::capture(),
        timing: None,
    })
}

fn run_cell(
    spec: &SweepSpec,
    config: SimulationConfig,
    value: f64,
    replicate: usize,
) -> Vec<BenchRow> {
    let truth = match generate_joint_truth(&config) {
        Ok(truth) => truth,
        Err(e) => {
            return spec
                .methods
                .iter()
                .map(|&method| BenchRow {
                    method,
                    axis_value: value,
                    replicate,
                    per_group_mcc: Vec::new(),
                    mean_mcc: f64::NAN,
                    wall_clock_seconds: 0.0,
                    error: Some(e.to_string()),
                })
                .collect();
        }
    };
    let supports: Vec<_> = (0..config.groups).map(|g| truth.support(g)).collect();
    spec.methods
        .iter()
        .map(|&method| {
            let options = PipelineOptions {
                method,
                policy: spec.policy,
                // Cells are the parallel unit; keep each pipeline sequential.
                execution: Execution::Sequential,
                ..PipelineOptions::default()
            };
            let start = Instant::now();
            match run(&truth.dataset, &options) {
                Ok(output) => {
                    let per_group: Vec<f64> = output
                        .groups
                        .iter()
                        .zip(&supports)
                        .map(|(analysis, support)| mcc(&analysis.edges, support, config.p).mcc)
                        .collect();
                    let mean = per_group.iter().sum::<f64>() / per_group.len() as f64;
                    BenchRow {
                        method,
                        axis_value: value,
                        replicate,
                        per_group_mcc: per_group,
                        mean_mcc: mean,
                        wall_clock_seconds: start.elapsed().as_secs_f64(),
                        error: None,
                    }
                }
                Err(e) => BenchRow {
                    method,
                    axis_value: value,
                    replicate,
                    per_group_mcc: Vec::new(),
                    mean_mcc: f64::NAN,
                    wall_clock_seconds: start.elapsed().as_secs_f64(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Time the full TTLS pipeline on one generated dataset.
///
/// Data generation and I/O are excluded; iterations run sequentially with a
/// sequential pipeline so the per-stage breakdown accounts for the total.
pub fn run_timing(config: &SimulationConfig, iterations: usize) -> Result<BenchReport> {
    config.validate()?;
    if iterations == 0 {
        return Err(Error::InvalidConfig("need at least 1 iteration".into()));
    }
    let truth = generate_joint_truth(config)?;
    let options = PipelineOptions {
        execution: Execution::Sequential,
        ..PipelineOptions::default()
    };

    let mut rows = Vec::with_capacity(iterations);
    let mut stages = StageTimes::default();
    let mut durations = Vec::with_capacity(iterations);
    let total_start = Instant::now();
    for iteration in 0..iterations {
        let start = Instant::now();
        let output = run(&truth.dataset, &options)?;
        let elapsed = start.elapsed().as_secs_f64();
        stages.add(&output.stages);
        durations.push(elapsed);
        rows.push(BenchRow {
            method: Method::Ttls,
            axis_value: iteration as f64,
            replicate: iteration,
            per_group_mcc: Vec::new(),
            mean_mcc: f64::NAN,
            wall_clock_seconds: elapsed,
            error: None,
        });
    }
    let total_seconds = total_start.elapsed().as_secs_f64();

    let mut sorted = durations.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite durations"));
    let median_seconds = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };

    Ok(BenchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        kind: "timing".into(),
        axis: None,
        rows,
        environment: Environment::capture(),
        timing: Some(TimingSummary {
            iterations,
            median_seconds,
            total_seconds,
            stages,
        }),
    })
}
