//! End-to-end estimation: shrinkage, partial correlations, significance
//! testing, and edge selection for every group, plus the cross-group
//! consensus network.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::covariance::GroupedDataset;
use crate::error::Result;
use crate::exec::{map_indices, Execution};
use crate::inference::{
    edge_pvalues, fdr_adjust, partial_correlations, selection_mask, shared_edges, Edge, EdgeSet,
    HCResult, InferenceWarning, PartialCorrelationResult, SelectionPolicy,
};
use crate::shrinkage::{
    prepare_moments, single_target_solution, ttls_from_moments, ShrinkOptions, ShrinkageSolution,
};

/// Estimation method: the full two-target shrinkage, or its `gamma1 = 0`
/// restriction (identity-target-only shrinkage, one group at a time).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ttls,
    SingleTarget,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Ttls => write!(f, "ttls"),
            Method::SingleTarget => write!(f, "single_target"),
        }
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct StageTimes {
    pub covariance: f64,
    pub shared_target: f64,
    pub variance: f64,
    pub qp: f64,
    pub inversion: f64,
    pub testing: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.covariance
            + self.shared_target
            + self.variance
            + self.qp
            + self.inversion
            + self.testing
    }

    pub fn add(&mut self, other: &StageTimes) {
        self.covariance += other.covariance;
        self.shared_target += other.shared_target;
        self.variance += other.variance;
        self.qp += other.qp;
        self.inversion += other.inversion;
        self.testing += other.testing;
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub method: Method,
    pub standardize: bool,
    pub pre_shrink: bool,
    pub policy: SelectionPolicy,
    /// Force the shrinkage intensities instead of optimizing (TTLS only).
    pub gamma_override: Option<(f64, f64)>,
    pub execution: Execution,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            method: Method::Ttls,
            standardize: true,
            pre_shrink: false,
            policy: SelectionPolicy::Auto,
            gamma_override: None,
            execution: Execution::Parallel,
        }
    }
}

/// Everything the pipeline produced for one group.
#[derive(Clone, Debug)]
pub struct GroupAnalysis {
    pub group: String,
    pub solution: ShrinkageSolution,
    pub partial: PartialCorrelationResult,
    /// Benjamini-Hochberg adjusted p-values, canonical pair order.
    pub adjusted_pvalues: Vec<f64>,
    /// Selection decision per canonical pair.
    pub selected: Vec<bool>,
    /// The selected edges only.
    pub edges: EdgeSet,
    /// Higher-criticism scan result when an HC policy ran.
    pub hc: Option<HCResult>,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub groups: Vec<GroupAnalysis>,
    pub shared: EdgeSet,
    pub stages: StageTimes,
}

/// Run the full workflow on a dataset. Results are independent of the
/// execution strategy and thread count.
pub fn run(dataset: &GroupedDataset, options: &PipelineOptions) -> Result<PipelineOutput> {
    options.policy.validate()?;
    let mut stages = StageTimes::default();

    let shrink_options = ShrinkOptions {
        standardize: options.standardize,
        pre_shrink: options.pre_shrink,
        gamma_override: options.gamma_override,
        execution: options.execution,
    };
    let moments = prepare_moments(dataset, &shrink_options, &mut stages)?;
    let solutions: Vec<ShrinkageSolution> = match options.method {
        Method::Ttls => ttls_from_moments(&moments, &shrink_options, &mut stages)?,
        Method::SingleTarget => {
            let t = Instant::now();
            let solutions = map_indices(options.execution, moments.len(), |i| {
                single_target_solution(&moments[i])
            });
            stages.qp += t.elapsed().as_secs_f64();
            solutions
        }
    };

    let t = Instant::now();
    let rhos: Vec<_> = map_indices(options.execution, solutions.len(), |i| {
        partial_correlations(&solutions[i].sigma_hat)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    stages.inversion += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let analyses: Vec<GroupAnalysis> = map_indices(options.execution, rhos.len(), |g| {
        let rho = rhos[g].clone();
        let solution = solutions[g].clone();
        let group = dataset.group_names()[g].clone();
        let (pvalues, mut warnings) = edge_pvalues(&rho, solution.n_effective);
        if solution.degenerate {
            warnings.push(InferenceWarning::DegenerateObjective);
        }
        let adjusted = fdr_adjust(&pvalues);
        let p = rho.nrows();
        let (selected, hc) = selection_mask(&adjusted, p, &options.policy)?;
        let mut edges = Vec::new();
        let mut flat = 0usize;
        for i in 0..p {
            for j in (i + 1)..p {
                if selected[flat] {
                    edges.push(Edge {
                        i,
                        j,
                        weight: rho[(i, j)],
                    });
                }
                flat += 1;
            }
        }
        Ok(GroupAnalysis {
            group: group.clone(),
            partial: PartialCorrelationResult {
                rho,
                pvalues,
                n_effective: solution.n_effective,
                warnings,
            },
            solution,
            adjusted_pvalues: adjusted,
            selected,
            edges: EdgeSet { group, edges },
            hc,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let shared = shared_edges(
        &analyses
            .iter()
            .map(|a| a.edges.clone())
            .collect::<Vec<_>>(),
    );
    stages.testing += t.elapsed().as_secs_f64();

    Ok(PipelineOutput {
        groups: analyses,
        shared,
        stages,
    })
}
