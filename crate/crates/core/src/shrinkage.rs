//! Two-target linear shrinkage (TTLS) of per-group sample covariances.
//!
//! For group `i` with sample covariance `S_i`, the estimator is
//!
//! ```text
//! Sigma_i = (1 - g1 - g2) * S_i + g1 * Shared_i + g2 * I
//! ```
//!
//! where `Shared_i` averages the other groups' (optionally pre-shrunk) sample
//! covariances and `I` is the identity. The intensities `(g1, g2)` minimize a
//! plug-in estimate of the Frobenius risk, a 2-variable convex quadratic
//!
//! ```text
//! F(g) = g^T A g - 2 g^T b,    g1 >= 0, g2 >= 0, g1 + g2 <= 1,
//! ```
//!
//! with `A` the Gram matrix of Frobenius inner products of
//! `{Shared_i - S_i, I - S_i}` and `b` built from variance estimates of the
//! sample covariances (the single-target case recovers the classical
//! Ledoit-Wolf / Schafer-Strimmer identity-target shrinkage). The constrained
//! minimum is found exactly by enumerating the KKT candidates of the simplex:
//! the interior stationary point, the three edge minimizers, and the three
//! vertices.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::covariance::{
    centered_values, sample_covariance, standardize, CovarianceEstimate, DataMatrix,
    GroupedDataset,
};
use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::linalg::{frobenius_norm_sq, symmetrize};
use crate::pipeline::StageTimes;

/// Absolute objective-value window treated as a tie in [`solve_gamma`].
const TIE_TOL: f64 = 1e-10;

/// Relative determinant tolerance below which `A` counts as singular.
const SINGULAR_RTOL: f64 = 1e-12;

/// Shrinkage weights on the shared target (`gamma1`) and the identity
/// (`gamma2`). Feasible values satisfy `gamma1 >= 0`, `gamma2 >= 0` and
/// `gamma1 + gamma2 <= 1` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageIntensities {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl ShrinkageIntensities {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !gamma1.is_finite() || !gamma2.is_finite() {
            return Err(Error::InvalidConfig(
                "shrinkage intensities must be finite".into(),
            ));
        }
        if gamma1 < 0.0 || gamma2 < 0.0 || gamma1 + gamma2 > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "infeasible shrinkage intensities ({gamma1}, {gamma2})"
            )));
        }
        Ok(Self { gamma1, gamma2 })
    }

    pub fn sum(&self) -> f64 {
        self.gamma1 + self.gamma2
    }
}

/// The quadratic risk proxy `F(g) = g^T A g - 2 g^T b`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadraticObjective {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl QuadraticObjective {
    pub fn value(&self, gamma1: f64, gamma2: f64) -> f64 {
        let a12 = 0.5 * (self.a[0][1] + self.a[1][0]);
        self.a[0][0] * gamma1 * gamma1
            + 2.0 * a12 * gamma1 * gamma2
            + self.a[1][1] * gamma2 * gamma2
            - 2.0 * (self.b[0] * gamma1 + self.b[1] * gamma2)
    }
}

/// Constraints that hold with equality at a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveConstraint {
    #[serde(rename = "g1_zero")]
    Gamma1Zero,
    #[serde(rename = "g2_zero")]
    Gamma2Zero,
    SumOne,
}

/// Output of [`solve_gamma`].
#[derive(Clone, Debug)]
pub struct GammaSolve {
    pub intensities: ShrinkageIntensities,
    pub objective_value: f64,
    pub active_constraints: BTreeSet<ActiveConstraint>,
    /// `A` was numerically singular and distinct candidates tied in objective
    /// value; the deterministic tie-break (smallest `gamma1 + gamma2`, then
    /// smallest `gamma1`) picked the winner. A warning, not a failure.
    pub degenerate: bool,
}

/// Full shrinkage result for one group.
#[derive(Clone, Debug)]
pub struct ShrinkageSolution {
    pub intensities: ShrinkageIntensities,
    pub sigma_hat: Array2<f64>,
    pub objective_value: f64,
    pub active_constraints: BTreeSet<ActiveConstraint>,
    pub degenerate: bool,
    /// Observations in the group itself.
    pub n: usize,
    /// Effective observation count for downstream significance testing; see
    /// [`effective_sample_size`].
    pub n_effective: usize,
    /// Variance estimate of the group's sample covariance.
    pub v_sample: f64,
    /// Variance estimate of the shared target (0 for single-target runs).
    pub v_shared: f64,
}

/// Options for [`ttls_shrink`].
#[derive(Clone, Copy, Debug)]
pub struct ShrinkOptions {
    /// Standardize each group to unit column variance first (default on);
    /// shrinking raw covariances of mixed scale toward `I` is incoherent.
    pub standardize: bool,
    /// Replace each averaged covariance by its single-target shrinkage
    /// before building the shared target (default off). Guarantees a
    /// non-singular target when `p > n`, but in that regime the
    /// identity-target intensities approach 1, the pre-shrunk target becomes
    /// nearly collinear with `I`, and the optimizer then has no reason to
    /// weight the shared target at all — so raw averaging is the default.
    pub pre_shrink: bool,
    /// Skip the optimization and use these intensities for every group.
    pub gamma_override: Option<(f64, f64)>,
    pub execution: Execution,
}

impl Default for ShrinkOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            pre_shrink: false,
            gamma_override: None,
            execution: Execution::Parallel,
        }
    }
}

/// Per-group sufficient statistics for shrinkage: the sample covariance and
/// the variance estimate of that covariance.
#[derive(Clone, Debug)]
pub struct GroupMoments {
    pub covariance: CovarianceEstimate,
    pub variance: f64,
}

/// Compute [`GroupMoments`] for one observation matrix.
pub fn group_moments(data: &DataMatrix) -> Result<GroupMoments> {
    let covariance = sample_covariance(data)?;
    let variance = v_hat_sample(data, &covariance)?;
    Ok(GroupMoments {
        covariance,
        variance,
    })
}

/// Variance estimate of a covariance-type estimate `M` from its
/// per-observation contributions `M_k`:
///
/// ```text
/// V(M) = n / ((n-1)^2 (n-2)) * sum_k || M_k - ((n-1)/n) M ||_F^2
/// ```
///
/// The deterministic identity target has no sampling variance, so `V(I) = 0`
/// by construction elsewhere; this function is the estimator for the random
/// matrices.
pub fn v_hat(contributions: &[Array2<f64>], estimate: &ArrayView2<f64>, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::TooFewObservations(n));
    }
    if contributions.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} contributions for n = {n}",
            contributions.len()
        )));
    }
    let dim = estimate.dim();
    let scale = (n as f64 - 1.0) / n as f64;
    let mut total = 0.0_f64;
    for w in contributions {
        if w.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "contribution is {:?}, estimate is {:?}",
                w.dim(),
                dim
            )));
        }
        let mut dev = 0.0_f64;
        for (wij, mij) in w.iter().zip(estimate.iter()) {
            let d = wij - scale * mij;
            dev += d * d;
        }
        total += dev;
    }
    let nf = n as f64;
    Ok(nf / ((nf - 1.0) * (nf - 1.0) * (nf - 2.0)) * total)
}

/// `V(S)` for a sample covariance without materializing the `n` contribution
/// matrices. Uses the rank-one structure of centered outer products:
/// `||w_k||_F^2 = ||x_k - xbar||^4` and `sum_k w_k = (n-1) S`, so
///
/// ```text
/// sum_k ||w_k - wbar||_F^2 = sum_k ||x_k - xbar||^4 - (n-1)^2/n * ||S||_F^2
/// ```
///
/// which is exactly the sum in [`v_hat`] evaluated at `M = S`.
pub fn v_hat_sample(data: &DataMatrix, covariance: &CovarianceEstimate) -> Result<f64> {
    let n = data.n();
    if n < 3 {
        return Err(Error::TooFewObservations(n));
    }
    if covariance.n != n || covariance.p() != data.p() {
        return Err(Error::DimensionMismatch(
            "covariance does not match the data it was computed from".into(),
        ));
    }
    let centered = centered_values(data);
    let mut quartic = 0.0_f64;
    for row in centered.rows() {
        let sq: f64 = row.iter().map(|v| v * v).sum();
        quartic += sq * sq;
    }
    let nf = n as f64;
    let deviation =
        quartic - (nf - 1.0) * (nf - 1.0) / nf * frobenius_norm_sq(&covariance.matrix.view());
    let c = nf / ((nf - 1.0) * (nf - 1.0) * (nf - 2.0));
    Ok(c * deviation.max(0.0))
}

/// Single-target intensity: weight on `I` that minimizes the restricted
/// objective `F(0, g2) = a22 g2^2 - 2 v g2`, clamped to `[0, 1]`. When the
/// covariance already equals the identity (`a22 = 0`) the weight is 0 by
/// convention.
fn single_target_gamma(covariance: &CovarianceEstimate, variance: f64) -> f64 {
    let a22 = identity_distance_sq(&covariance.matrix.view());
    if a22 <= 0.0 {
        return 0.0;
    }
    (variance / a22).clamp(0.0, 1.0)
}

fn identity_distance_sq(s: &ArrayView2<f64>) -> f64 {
    let p = s.nrows();
    let mut total = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let target = if i == j { 1.0 } else { 0.0 };
            let d = target - s[(i, j)];
            total += d * d;
        }
    }
    total
}

/// `(1 - g1 - g2) S + g1 Shared + g2 I`, elementwise.
pub fn combine(
    s: &ArrayView2<f64>,
    shared: &ArrayView2<f64>,
    gamma: &ShrinkageIntensities,
) -> Array2<f64> {
    let w = 1.0 - gamma.gamma1 - gamma.gamma2;
    let p = s.nrows();
    let mut out = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            let mut v = w * s[(i, j)] + gamma.gamma1 * shared[(i, j)];
            if i == j {
                v += gamma.gamma2;
            }
            out[(i, j)] = v;
        }
    }
    out
}

/// Average of the other groups' covariance matrices; with `pre_shrink` each
/// one is first replaced by its single-target shrinkage, which keeps the
/// target non-singular when `p > n`.
pub fn shared_target(
    groups: &[GroupMoments],
    exclude: usize,
    pre_shrink: bool,
) -> Result<CovarianceEstimate> {
    if groups.len() < 2 {
        return Err(Error::SingleGroup);
    }
    if exclude >= groups.len() {
        return Err(Error::DimensionMismatch(format!(
            "exclude index {exclude} out of range for {} groups",
            groups.len()
        )));
    }
    let p = groups[0].covariance.p();
    for g in groups {
        if g.covariance.p() != p {
            return Err(Error::DimensionMismatch(
                "groups disagree on variable count".into(),
            ));
        }
    }
    let mut sum = Array2::<f64>::zeros((p, p));
    let mut n_rest = 0usize;
    for (j, g) in groups.iter().enumerate() {
        if j == exclude {
            continue;
        }
        n_rest += g.covariance.n;
        if pre_shrink {
            let g2 = single_target_gamma(&g.covariance, g.variance);
            let gamma = ShrinkageIntensities {
                gamma1: 0.0,
                gamma2: g2,
            };
            sum += &combine(&g.covariance.matrix.view(), &g.covariance.matrix.view(), &gamma);
        } else {
            sum += &g.covariance.matrix;
        }
    }
    let denom = (groups.len() - 1) as f64;
    sum.mapv_inplace(|v| v / denom);
    symmetrize(&mut sum);
    Ok(CovarianceEstimate {
        matrix: sum,
        n: n_rest,
    })
}

/// Variance estimate of the shared target: groups are independent, so the
/// variance of the average is the scaled sum of the per-group variances,
/// `V(Shared_i) = (G-1)^{-2} sum_{j != i} V(S_j)`.
///
/// Reported as a per-group diagnostic. It is deliberately *not* subtracted
/// from `b_1` in the production objective (see `ttls_from_moments`): for a
/// cross-group target the correction term there is a covariance with `S_i`,
/// which vanishes by independence.
pub fn v_hat_shared(variances: &[f64], exclude: usize) -> f64 {
    let g = variances.len();
    let denom = ((g - 1) * (g - 1)) as f64;
    let sum: f64 = variances
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != exclude)
        .map(|(_, v)| v)
        .sum();
    sum / denom
}

/// Assemble the quadratic objective for one group from its covariance, its
/// shared target, and the two variance estimates. `V(I) = 0`: the identity
/// target is deterministic.
pub fn assemble_objective(
    s_i: &CovarianceEstimate,
    shared: &CovarianceEstimate,
    v_s: f64,
    v_shared: f64,
) -> Result<QuadraticObjective> {
    let p = s_i.p();
    if shared.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {p}x{p}, shared target is {}x{}",
            shared.p(),
            shared.p()
        )));
    }
    let s = &s_i.matrix;
    let t = &shared.matrix;
    let mut a11 = 0.0_f64;
    let mut a12 = 0.0_f64;
    let mut a22 = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            let d_shared = t[(i, j)] - s[(i, j)];
            let d_ident = if i == j { 1.0 - s[(i, j)] } else { -s[(i, j)] };
            a11 += d_shared * d_shared;
            a12 += d_shared * d_ident;
            a22 += d_ident * d_ident;
        }
    }
    Ok(QuadraticObjective {
        a: [[a11, a12], [a12, a22]],
        b: [v_s - v_shared, v_s],
    })
}

/// Exact constrained minimizer of `F(g) = g^T A g - 2 g^T b` over the simplex
/// `g1 >= 0, g2 >= 0, g1 + g2 <= 1`.
///
/// Candidates are enumerated in a fixed order — interior stationary point,
/// the `g1 = 0`, `g2 = 0` and `g1 + g2 = 1` edge minimizers, then the three
/// vertices — and the feasible one with the smallest objective wins. Ties
/// within `1e-10` break toward the smallest `g1 + g2`, then the smallest
/// `g1`, so results are reproducible across platforms. Every returned point
/// satisfies the constraints exactly.
pub fn solve_gamma(objective: &QuadraticObjective) -> GammaSolve {
    let a11 = objective.a[0][0];
    let a22 = objective.a[1][1];
    let a12 = 0.5 * (objective.a[0][1] + objective.a[1][0]);
    let b1 = objective.b[0];
    let b2 = objective.b[1];
    let eval = |g1: f64, g2: f64| {
        a11 * g1 * g1 + 2.0 * a12 * g1 * g2 + a22 * g2 * g2 - 2.0 * (b1 * g1 + b2 * g2)
    };

    let scale = a11.abs().max(a12.abs()).max(a22.abs());
    let det = a11 * a22 - a12 * a12;
    let singular = scale == 0.0 || det.abs() <= SINGULAR_RTOL * scale * scale;

    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(7);
    if !singular {
        candidates.push((
            (a22 * b1 - a12 * b2) / det,
            (a11 * b2 - a12 * b1) / det,
        ));
    }
    if a22 > 0.0 {
        candidates.push((0.0, b2 / a22));
    }
    if a11 > 0.0 {
        candidates.push((b1 / a11, 0.0));
    }
    let edge_curvature = a11 - 2.0 * a12 + a22;
    if edge_curvature > 0.0 {
        let t = (a22 - a12 + b1 - b2) / edge_curvature;
        if t.is_finite() {
            let mut g2 = 1.0 - t;
            // Guard the rare rounding where t + (1 - t) lands above 1.
            for _ in 0..4 {
                if t + g2 <= 1.0 {
                    break;
                }
                g2 = g2.next_down();
            }
            candidates.push((t, g2));
        }
    }
    candidates.push((0.0, 0.0));
    candidates.push((1.0, 0.0));
    candidates.push((0.0, 1.0));

    let mut best: Option<(f64, f64, f64)> = None;
    let mut tie = false;
    for &(g1, g2) in &candidates {
        if !g1.is_finite() || !g2.is_finite() {
            continue;
        }
        if g1 < 0.0 || g2 < 0.0 || g1 + g2 > 1.0 {
            continue;
        }
        let f = eval(g1, g2);
        match best {
            None => best = Some((g1, g2, f)),
            Some((bg1, bg2, bf)) => {
                if f < bf - TIE_TOL {
                    best = Some((g1, g2, f));
                } else if (f - bf).abs() <= TIE_TOL {
                    if g1 != bg1 || g2 != bg2 {
                        tie = true;
                    }
                    let better_sum = g1 + g2 < bg1 + bg2;
                    let equal_sum = g1 + g2 == bg1 + bg2;
                    if better_sum || (equal_sum && g1 < bg1) {
                        best = Some((g1, g2, f));
                    }
                }
            }
        }
    }
    // The origin vertex is always feasible.
    let (g1, g2, f) = best.expect("candidate list is never empty");

    let mut active = BTreeSet::new();
    if g1 == 0.0 {
        active.insert(ActiveConstraint::Gamma1Zero);
    }
    if g2 == 0.0 {
        active.insert(ActiveConstraint::Gamma2Zero);
    }
    if g1 + g2 == 1.0 {
        active.insert(ActiveConstraint::SumOne);
    }
    GammaSolve {
        intensities: ShrinkageIntensities {
            gamma1: g1,
            gamma2: g2,
        },
        objective_value: f,
        active_constraints: active,
        degenerate: singular && tie,
    }
}

/// Build a [`ShrinkageSolution`] for the single-target (`g1 = 0`) restriction
/// from precomputed moments.
pub fn single_target_solution(moments: &GroupMoments) -> ShrinkageSolution {
    let g2 = single_target_gamma(&moments.covariance, moments.variance);
    let a22 = identity_distance_sq(&moments.covariance.matrix.view());
    let gamma = ShrinkageIntensities {
        gamma1: 0.0,
        gamma2: g2,
    };
    let sigma_hat = combine(
        &moments.covariance.matrix.view(),
        &moments.covariance.matrix.view(),
        &gamma,
    );
    let mut active = BTreeSet::from([ActiveConstraint::Gamma1Zero]);
    if g2 == 0.0 {
        active.insert(ActiveConstraint::Gamma2Zero);
    }
    if g2 == 1.0 {
        active.insert(ActiveConstraint::SumOne);
    }
    ShrinkageSolution {
        intensities: gamma,
        sigma_hat,
        objective_value: a22 * g2 * g2 - 2.0 * moments.variance * g2,
        active_constraints: active,
        degenerate: false,
        n: moments.covariance.n,
        n_effective: moments.covariance.n,
        v_sample: moments.variance,
        v_shared: 0.0,
    }
}

/// Single-target shrinkage of a covariance toward the identity, with the
/// variance estimated from explicit per-observation contributions.
pub fn single_target_shrink(
    s: &CovarianceEstimate,
    contributions: &[Array2<f64>],
    n: usize,
) -> Result<ShrinkageSolution> {
    let variance = v_hat(contributions, &s.matrix.view(), n)?;
    Ok(single_target_solution(&GroupMoments {
        covariance: s.clone(),
        variance,
    }))
}

/// Effective sample size of the shrunk estimator, used downstream as the
/// observation count in significance tests.
///
/// Normalizing out the deterministic identity component, the random part of
/// the estimator is a weighted average of the group's own covariance (weight
/// `ws`, `n_own` observations) and the shared target (weight `wt`, `n_rest`
/// pooled observations); the effective count of such an average is
/// `1 / (ws^2 / n_own + wt^2 / n_rest)`. With `g1 = 0` this is exactly
/// `n_own`, so the single-target baseline keeps its classical test. The
/// resulting tests are nominal — shrinkage invalidates exact null
/// distributions regardless — which downstream warnings surface.
pub fn effective_sample_size(n_own: usize, n_rest: usize, gamma: &ShrinkageIntensities) -> usize {
    let w_total = 1.0 - gamma.gamma2;
    if w_total <= 1e-12 || n_rest == 0 {
        return n_own;
    }
    let ws = (1.0 - gamma.gamma1 - gamma.gamma2) / w_total;
    let wt = gamma.gamma1 / w_total;
    let denom = ws * ws / n_own as f64 + wt * wt / n_rest as f64;
    if denom <= 0.0 {
        return n_own;
    }
    (1.0 / denom).round().max(1.0) as usize
}

/// Run the full TTLS estimator on every group of a dataset.
pub fn ttls_shrink(
    dataset: &GroupedDataset,
    options: &ShrinkOptions,
) -> Result<Vec<ShrinkageSolution>> {
    let mut stages = StageTimes::default();
    ttls_shrink_staged(dataset, options, &mut stages)
}

/// As [`ttls_shrink`], accumulating wall-clock per stage (used by the
/// timing harness).
pub(crate) fn ttls_shrink_staged(
    dataset: &GroupedDataset,
    options: &ShrinkOptions,
    stages: &mut StageTimes,
) -> Result<Vec<ShrinkageSolution>> {
    let moments = prepare_moments(dataset, options, stages)?;
    ttls_from_moments(&moments, options, stages)
}

/// Standardize (optionally) and compute per-group moments.
pub(crate) fn prepare_moments(
    dataset: &GroupedDataset,
    options: &ShrinkOptions,
    stages: &mut StageTimes,
) -> Result<Vec<GroupMoments>> {
    let g = dataset.n_groups();

    let t = Instant::now();
    let prepared: Vec<DataMatrix> = map_indices(options.execution, g, |i| {
        let data = &dataset.groups()[i];
        if options.standardize {
            standardize(data)
        } else {
            Ok(data.clone())
        }
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let covariances: Vec<CovarianceEstimate> =
        map_indices(options.execution, g, |i| sample_covariance(&prepared[i]))
            .into_iter()
            .collect::<Result<_>>()?;
    stages.covariance += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let variances: Vec<f64> = map_indices(options.execution, g, |i| {
        v_hat_sample(&prepared[i], &covariances[i])
    })
    .into_iter()
    .collect::<Result<_>>()?;
    stages.variance += t.elapsed().as_secs_f64();

    Ok(covariances
        .into_iter()
        .zip(variances)
        .map(|(covariance, variance)| GroupMoments {
            covariance,
            variance,
        })
        .collect())
}

pub(crate) fn ttls_from_moments(
    moments: &[GroupMoments],
    options: &ShrinkOptions,
    stages: &mut StageTimes,
) -> Result<Vec<ShrinkageSolution>> {
    let g = moments.len();
    let variances: Vec<f64> = moments.iter().map(|m| m.variance).collect();

    let t = Instant::now();
    // Pre-shrunk matrices are shared across all G targets, so build them once.
    let averaged: Vec<Array2<f64>> = if options.pre_shrink {
        map_indices(options.execution, g, |j| {
            let gamma = ShrinkageIntensities {
                gamma1: 0.0,
                gamma2: single_target_gamma(&moments[j].covariance, moments[j].variance),
            };
            combine(
                &moments[j].covariance.matrix.view(),
                &moments[j].covariance.matrix.view(),
                &gamma,
            )
        })
    } else {
        moments.iter().map(|m| m.covariance.matrix.clone()).collect()
    };
    let targets: Vec<CovarianceEstimate> = map_indices(options.execution, g, |i| {
        let p = averaged[0].nrows();
        let mut sum = Array2::<f64>::zeros((p, p));
        let mut n_rest = 0usize;
        for (j, m) in averaged.iter().enumerate() {
            if j != i {
                sum += m;
                n_rest += moments[j].covariance.n;
            }
        }
        sum.mapv_inplace(|v| v / (g as f64 - 1.0));
        CovarianceEstimate {
            matrix: sum,
            n: n_rest,
        }
    });
    stages.shared_target += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let solutions: Vec<ShrinkageSolution> = map_indices(options.execution, g, |i| {
        // The shared target is built from the *other* groups, so it is
        // independent of S_i and the covariance correction to b_1 is zero.
        // Its sampling noise still penalizes gamma_1 through the realized
        // ||shared - S_i||^2 entry of A; subtracting V(shared) here as well
        // would count it twice and systematically starve the shared target.
        let objective = assemble_objective(
            &moments[i].covariance,
            &targets[i],
            moments[i].variance,
            0.0,
        )?;
        let solve = match options.gamma_override {
            Some((g1, g2)) => {
                let gamma = ShrinkageIntensities::new(g1, g2)?;
                let mut active = BTreeSet::new();
                if gamma.gamma1 == 0.0 {
                    active.insert(ActiveConstraint::Gamma1Zero);
                }
                if gamma.gamma2 == 0.0 {
                    active.insert(ActiveConstraint::Gamma2Zero);
                }
                if gamma.sum() == 1.0 {
                    active.insert(ActiveConstraint::SumOne);
                }
                GammaSolve {
                    objective_value: objective.value(gamma.gamma1, gamma.gamma2),
                    intensities: gamma,
                    active_constraints: active,
                    degenerate: false,
                }
            }
            None => solve_gamma(&objective),
        };
        let sigma_hat = combine(
            &moments[i].covariance.matrix.view(),
            &targets[i].matrix.view(),
            &solve.intensities,
        );
        Ok(ShrinkageSolution {
            n_effective: effective_sample_size(
                moments[i].covariance.n,
                targets[i].n,
                &solve.intensities,
            ),
            intensities: solve.intensities,
            sigma_hat,
            objective_value: solve.objective_value,
            active_constraints: solve.active_constraints,
            degenerate: solve.degenerate,
            n: moments[i].covariance.n,
            v_sample: moments[i].variance,
            v_shared: v_hat_shared(&variances, i),
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;
    stages.qp += t.elapsed().as_secs_f64();

    Ok(solutions)
}
