//! Joint-network simulation and scoring.
//!
//! Generates `G` sparse precision matrices that share a configurable fraction
//! of their edge support, samples multivariate normal data from each, and
//! scores recovered networks with Matthews correlation over the edge/non-edge
//! confusion matrix.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), which is specified and
//! platform-stable; per-purpose streams are derived from the base seed with
//! SplitMix64, so identical configs reproduce identical truths bit for bit.

use ndarray::Array2;
use rand::prelude::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::{DataMatrix, GroupedDataset};
use crate::error::{Error, Result};
use crate::inference::{flat_to_pair, pair_count, Edge, EdgeSet};
use crate::linalg::{cholesky, solve_lower_transposed};

/// Parameters of one simulated joint-network instance.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Variable count.
    pub p: usize,
    /// Observations per group.
    pub n: usize,
    /// Group count.
    pub groups: usize,
    /// Fraction of each group's edges drawn from the shared skeleton.
    #[serde(default = "default_shared_fraction")]
    pub shared_fraction: f64,
    /// Target average degree; each group gets `ceil(edges_per_node * p / 2)`
    /// edges.
    #[serde(default = "default_edges_per_node")]
    pub edges_per_node: f64,
    #[serde(default)]
    pub seed: u64,
    /// Magnitude range for generated partial correlations (sign is random).
    #[serde(default = "default_magnitude")]
    pub magnitude: (f64, f64),
}

fn default_shared_fraction() -> f64 {
    0.4
}

fn default_edges_per_node() -> f64 {
    2.0
}

fn default_magnitude() -> (f64, f64) {
    (0.1, 0.4)
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p < 4 {
            return Err(Error::InvalidConfig(format!(
                "p must be at least 4, got {}",
                self.p
            )));
        }
        if self.n < 3 {
            return Err(Error::InvalidConfig(format!(
                "n must be at least 3, got {}",
                self.n
            )));
        }
        if self.groups < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 groups, got {}",
                self.groups
            )));
        }
        if !(0.0..=1.0).contains(&self.shared_fraction) {
            return Err(Error::InvalidConfig(format!(
                "shared_fraction must be in [0, 1], got {}",
                self.shared_fraction
            )));
        }
        if self.edges_per_node <= 0.0 {
            return Err(Error::InvalidConfig(
                "edges_per_node must be positive".into(),
            ));
        }
        let (lo, hi) = self.magnitude;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "magnitude range must satisfy 0 < low <= high < 1, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    /// Total edges per group.
    pub fn edges_per_group(&self) -> usize {
        (self.edges_per_node * self.p as f64 / 2.0).ceil() as usize
    }

    /// Edges drawn from the shared skeleton.
    pub fn shared_edge_count(&self) -> usize {
        ((self.shared_fraction * self.edges_per_group() as f64).ceil() as usize)
            .min(self.edges_per_group())
    }
}

/// Ground truth for one simulated instance: precision matrices, edge
/// bookkeeping, and the sampled data.
#[derive(Clone, Debug)]
pub struct SimulationTruth {
    pub config: SimulationConfig,
    pub precisions: Vec<Array2<f64>>,
    pub shared_edges: EdgeSet,
    pub unique_edges: Vec<EdgeSet>,
    pub dataset: GroupedDataset,
}

impl SimulationTruth {
    /// Full off-diagonal support of group `g`'s precision matrix as an edge
    /// set, weighted by the true partial correlations.
    pub fn support(&self, g: usize) -> EdgeSet {
        let theta = &self.precisions[g];
        let p = theta.nrows();
        let mut edges = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if theta[(i, j)] != 0.0 {
                    edges.push(Edge {
                        i,
                        j,
                        weight: -theta[(i, j)],
                    });
                }
            }
        }
        EdgeSet {
            group: self.dataset.group_names()[g].clone(),
            edges,
        }
    }
}

/// Confusion counts and Matthews correlation for one predicted/reference
/// edge-set pair.
#[derive(Clone, Debug, Serialize)]
pub struct GroupScore {
    pub group: String,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub mcc: f64,
}

/// Aggregate score over one or more groups; counts are pooled, `per_group`
/// holds the individual entries.
#[derive(Clone, Debug, Serialize)]
pub struct ScoreReport {
    pub mcc: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub per_group: Vec<GroupScore>,
}

fn mcc_from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> f64 {
    let (tp, fp, tn, fn_) = (tp as f64, fp as f64, tn as f64, fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom <= 0.0 {
        // Any empty margin makes the coefficient undefined; report chance
        // level.
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// Matthews correlation of a predicted edge set against a reference over all
/// `p (p-1) / 2` variable pairs.
pub fn mcc(predicted: &EdgeSet, truth: &EdgeSet, p: usize) -> ScoreReport {
    let pred = predicted.pairs();
    let real = truth.pairs();
    let tp = pred.intersection(&real).count();
    let fp = pred.len() - tp;
    let fn_ = real.len() - tp;
    let tn = pair_count(p) - tp - fp - fn_;
    let score = GroupScore {
        group: predicted.group.clone(),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        mcc: mcc_from_counts(tp, fp, tn, fn_),
    };
    ScoreReport {
        mcc: score.mcc,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        per_group: vec![score],
    }
}

/// Score every group's predicted edges against the matching truth supports.
/// Top-level counts are pooled across groups.
pub fn score_groups(predicted: &[EdgeSet], truths: &[EdgeSet], p: usize) -> ScoreReport {
    let mut per_group = Vec::with_capacity(predicted.len());
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (pred, real) in predicted.iter().zip(truths) {
        let report = mcc(pred, real, p);
        tp += report.true_positives;
        fp += report.false_positives;
        tn += report.true_negatives;
        fn_ += report.false_negatives;
        per_group.extend(report.per_group);
    }
    ScoreReport {
        mcc: mcc_from_counts(tp, fp, tn, fn_),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        per_group,
    }
}

/// SplitMix64 step, used to derive independent seeds from a base seed.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-purpose seed derivation.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Draw `n` observations from `N(0, precision^{-1})`.
///
/// Factor `precision = L L^T` and solve `L^T x = z` per standard-normal draw
/// `z`, so no explicit inverse is formed. Deterministic for a given seed.
pub fn sample_mvn(precision: &Array2<f64>, n: usize, seed: u64) -> Result<DataMatrix> {
    let p = precision.nrows();
    let l = cholesky(&precision.view()).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::NotPositiveDefinite,
        other => other,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::<f64>::zeros((n, p));
    let mut z = vec![0.0_f64; p];
    let mut x = vec![0.0_f64; p];
    for mut row in values.rows_mut() {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        solve_lower_transposed(&l.view(), &z, &mut x);
        for (r, v) in row.iter_mut().zip(&x) {
            *r = *v;
        }
    }
    DataMatrix::new(values)
}

/// Generate a joint-network ground truth:
///
/// 1. draw a shared edge skeleton uniformly without replacement;
/// 2. per group, draw the remaining edges from the still-unused pairs, so a
///    unique edge belongs to exactly one group;
/// 3. give every edge a uniform magnitude with random sign (shared edges keep
///    one value across groups);
/// 4. make each matrix positive definite by diagonal dominance
///    (`diag = sum of absolute off-diagonal row entries + 0.1`) followed by
///    rescaling to unit diagonal, which preserves definiteness by congruence;
/// 5. sample `n` observations per group from the implied Gaussian.
pub fn generate_joint_truth(config: &SimulationConfig) -> Result<SimulationTruth> {
    config.validate()?;
    let p = config.p;
    let g = config.groups;
    let total_pairs = pair_count(p);
    let edges_per_group = config.edges_per_group();
    let n_shared = config.shared_edge_count();
    let n_unique = edges_per_group - n_shared;
    let needed = n_shared + g * n_unique;
    if needed > total_pairs {
        return Err(Error::InfeasibleConfig(format!(
            "{needed} distinct edges requested but only {total_pairs} pairs exist \
             (p = {p}, groups = {g})"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pool: Vec<usize> = (0..total_pairs).collect();

    let shared_flat = draw_without_replacement(&mut pool, n_shared, &mut rng);
    let shared_values: Vec<f64> = shared_flat
        .iter()
        .map(|_| draw_magnitude(&mut rng, config.magnitude))
        .collect();

    let mut unique_flat: Vec<Vec<usize>> = Vec::with_capacity(g);
    let mut unique_values: Vec<Vec<f64>> = Vec::with_capacity(g);
    for _ in 0..g {
        let flats = draw_without_replacement(&mut pool, n_unique, &mut rng);
        let values = flats
            .iter()
            .map(|_| draw_magnitude(&mut rng, config.magnitude))
            .collect();
        unique_flat.push(flats);
        unique_values.push(values);
    }

    let mut precisions = Vec::with_capacity(g);
    let mut unique_edges = Vec::with_capacity(g);
    for grp in 0..g {
        let mut theta = Array2::<f64>::zeros((p, p));
        for (flat, value) in shared_flat.iter().zip(&shared_values) {
            let (i, j) = flat_to_pair(p, *flat);
            theta[(i, j)] = *value;
            theta[(j, i)] = *value;
        }
        for (flat, value) in unique_flat[grp].iter().zip(&unique_values[grp]) {
            let (i, j) = flat_to_pair(p, *flat);
            theta[(i, j)] = *value;
            theta[(j, i)] = *value;
        }
        enforce_positive_definite(&mut theta);
        // Definiteness is guaranteed by construction; verify anyway so a bug
        // here can never leak an indefinite truth into a benchmark.
        cholesky(&theta.view()).map_err(|_| Error::NotPositiveDefinite)?;
        precisions.push(theta);
    }

    let group_names: Vec<String> = (0..g).map(|i| format!("group{:03}", i + 1)).collect();
    let variable_names: Vec<String> = (0..p).map(|i| format!("v{:04}", i + 1)).collect();

    let mut groups = Vec::with_capacity(g);
    for (grp, theta) in precisions.iter().enumerate() {
        let seed = derive_seed(config.seed, grp as u64 + 1);
        groups.push(sample_mvn(theta, config.n, seed)?);
    }
    let dataset = GroupedDataset::new(groups, variable_names, group_names.clone())?;

    let shared_edge_set = edge_set_from_flats("shared", p, &shared_flat, |flat| {
        // Weight is the mean of the realized partial correlations across
        // groups (diagonal rescaling makes them differ per group).
        let (i, j) = flat_to_pair(p, flat);
        let sum: f64 = precisions.iter().map(|t| -t[(i, j)]).sum();
        sum / g as f64
    })?;
    for grp in 0..g {
        let theta = &precisions[grp];
        unique_edges.push(edge_set_from_flats(
            &group_names[grp],
            p,
            &unique_flat[grp],
            |flat| {
                let (i, j) = flat_to_pair(p, flat);
                -theta[(i, j)]
            },
        )?);
    }

    Ok(SimulationTruth {
        config: *config,
        precisions,
        shared_edges: shared_edge_set,
        unique_edges,
        dataset,
    })
}

fn edge_set_from_flats(
    group: &str,
    p: usize,
    flats: &[usize],
    weight: impl Fn(usize) -> f64,
) -> Result<EdgeSet> {
    let edges = flats
        .iter()
        .map(|&flat| {
            let (i, j) = flat_to_pair(p, flat);
            Edge {
                i,
                j,
                weight: weight(flat),
            }
        })
        .collect();
    EdgeSet::new(group, edges)
}

/// Remove and return `k` uniformly chosen entries from the pool. The pool is
/// kept sorted so draws depend only on the RNG stream, and the returned flats
/// are sorted into canonical order.
fn draw_without_replacement(pool: &mut Vec<usize>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    debug_assert!(k <= pool.len());
    let positions = rand::seq::index::sample(rng, pool.len(), k);
    let mut taken: Vec<usize> = positions.iter().map(|pos| pool[pos]).collect();
    let mark: std::collections::HashSet<usize> = taken.iter().copied().collect();
    pool.retain(|flat| !mark.contains(flat));
    taken.sort_unstable();
    taken
}

fn draw_magnitude(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let magnitude = if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    };
    let sign = *[-1.0, 1.0].choose(rng).expect("non-empty");
    sign * magnitude
}

/// Diagonal dominance followed by rescaling to unit diagonal.
fn enforce_positive_definite(theta: &mut Array2<f64>) {
    let p = theta.nrows();
    let mut diag = vec![0.0_f64; p];
    for i in 0..p {
        let mut row_sum = 0.0;
        for j in 0..p {
            if i != j {
                row_sum += theta[(i, j)].abs();
            }
        }
        diag[i] = row_sum + 0.1;
        theta[(i, i)] = diag[i];
    }
    for i in 0..p {
        for j in 0..p {
            theta[(i, j)] /= (diag[i] * diag[j]).sqrt();
        }
        theta[(i, i)] = 1.0;
    }
}
