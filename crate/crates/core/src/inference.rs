//! From a shrunk covariance to a sparse network: precision matrix, partial
//! correlations, per-edge significance, Benjamini-Hochberg adjustment, and
//! higher-criticism edge selection.
//!
//! Higher criticism (Donoho & Jin 2004) is a second-level test over ordered
//! p-values suited to very sparse signals; the two objective functions here
//! follow Donoho & Jin (2009) and Li & Siegmund (2015). Both are applied to
//! FDR-adjusted p-values, and both determine a cut rank `t` below which all
//! edges are declared significant.
//!
//! Edges are indexed in canonical order throughout: upper triangle,
//! row-major, `i < j`. P-value vectors, selection masks, and file outputs all
//! align to this order.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg::{invert_spd, max_asymmetry};

/// Clamp for p-values entering the higher-criticism denominators and logs.
const P_CLAMP: f64 = 1e-15;

/// Number of upper-triangle pairs for `p` variables.
pub fn pair_count(p: usize) -> usize {
    p * (p - 1) / 2
}

/// Canonical flat index of the pair `(i, j)`, `i < j`.
pub fn pair_to_flat(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < p);
    i * (2 * p - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`pair_to_flat`].
pub fn flat_to_pair(p: usize, flat: usize) -> (usize, usize) {
    debug_assert!(flat < pair_count(p));
    // Row i starts at offset i*(2p - i - 1)/2; solve the quadratic and fix up.
    let row_start = |i: usize| i * (2 * p - i - 1) / 2;
    let pf = p as f64;
    let ff = flat as f64;
    let mut i = ((2.0 * pf - 1.0 - ((2.0 * pf - 1.0) * (2.0 * pf - 1.0) - 8.0 * ff).sqrt()) / 2.0)
        .floor() as usize;
    i = i.min(p - 2);
    while i + 1 < p - 1 && row_start(i + 1) <= flat {
        i += 1;
    }
    while row_start(i) > flat {
        i -= 1;
    }
    (i, i + 1 + (flat - row_start(i)))
}

/// An undirected edge `(i, j)` with `i < j` and a weight (the partial
/// correlation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Selected edges for one group (or the cross-group consensus).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EdgeSet {
    pub group: String,
    pub edges: Vec<Edge>,
}

impl EdgeSet {
    /// Build from raw edges; normalizes orientation to `i < j`, sorts into
    /// canonical order, and rejects self-loops and duplicates.
    pub fn new(group: impl Into<String>, edges: Vec<Edge>) -> Result<Self> {
        let mut edges: Vec<Edge> = edges
            .into_iter()
            .map(|e| {
                if e.i < e.j {
                    Ok(e)
                } else if e.j < e.i {
                    Ok(Edge {
                        i: e.j,
                        j: e.i,
                        weight: e.weight,
                    })
                } else {
                    Err(Error::InvalidConfig(format!("self-loop on node {}", e.i)))
                }
            })
            .collect::<Result<_>>()?;
        edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        for w in edges.windows(2) {
            if (w[0].i, w[0].j) == (w[1].i, w[1].j) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate edge ({}, {})",
                    w[0].i, w[0].j
                )));
            }
        }
        Ok(Self {
            group: group.into(),
            edges,
        })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn pairs(&self) -> std::collections::BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.i, e.j)).collect()
    }
}

/// Partial correlation matrix with its per-edge p-values.
#[derive(Clone, Debug)]
pub struct PartialCorrelationResult {
    /// Symmetric with unit diagonal.
    pub rho: Array2<f64>,
    /// Two-sided p-values in canonical pair order.
    pub pvalues: Vec<f64>,
    /// Observation count the tests were computed with.
    pub n_effective: usize,
    pub warnings: Vec<InferenceWarning>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InferenceWarning {
    /// `n <= p` forced the t-test degrees of freedom to the floor of 1; the
    /// resulting p-values are nominal at best.
    DfFloored { n: usize, p: usize },
    /// A partial correlation reached magnitude 1; its p-value was set to 0.
    DegenerateRho { i: usize, j: usize },
    /// The shrinkage objective was singular and tie-broken deterministically.
    DegenerateObjective,
}

impl std::fmt::Display for InferenceWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InferenceWarning::DfFloored { n, p } => write!(
                f,
                "degrees of freedom floored at 1 (n = {n}, p = {p}); p-values are nominal"
            ),
            InferenceWarning::DegenerateRho { i, j } => {
                write!(f, "partial correlation at ({i}, {j}) has magnitude >= 1")
            }
            InferenceWarning::DegenerateObjective => {
                write!(f, "shrinkage objective was singular; tie broken deterministically")
            }
        }
    }
}

/// Partial correlations from a symmetric positive definite covariance:
/// invert to the precision `Omega` and normalize,
/// `rho_ij = -Omega_ij / sqrt(Omega_ii Omega_jj)`, unit diagonal.
pub fn partial_correlations(sigma_hat: &Array2<f64>) -> Result<Array2<f64>> {
    let p = sigma_hat.nrows();
    if sigma_hat.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {p}x{}",
            sigma_hat.ncols()
        )));
    }
    if max_asymmetry(&sigma_hat.view()) > 1e-8 {
        return Err(Error::DimensionMismatch(
            "covariance is not symmetric".into(),
        ));
    }
    let omega = invert_spd(&sigma_hat.view())?;
    let mut rho = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        rho[(i, i)] = 1.0;
        for j in (i + 1)..p {
            let v = -omega[(i, j)] / (omega[(i, i)] * omega[(j, j)]).sqrt();
            rho[(i, j)] = v;
            rho[(j, i)] = v;
        }
    }
    Ok(rho)
}

/// Two-sided t-test p-values for every upper-triangle partial correlation.
///
/// `t = rho * sqrt(df / (1 - rho^2))` with `df = n - 2 - (p - 2)`: the test
/// conditions on the remaining `p - 2` variables. The floor `df >= 1` keeps
/// the test defined when `n <= p` and records a warning, since p-values are
/// then conservative to the point of meaninglessness.
pub fn edge_pvalues(rho: &Array2<f64>, n: usize) -> (Vec<f64>, Vec<InferenceWarning>) {
    let p = rho.nrows();
    let mut warnings = Vec::new();
    let df = if n > p {
        (n - p) as f64
    } else {
        warnings.push(InferenceWarning::DfFloored { n, p });
        1.0
    };
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let mut pvalues = Vec::with_capacity(pair_count(p));
    for i in 0..p {
        for j in (i + 1)..p {
            let r = rho[(i, j)];
            if r.abs() >= 1.0 {
                warnings.push(InferenceWarning::DegenerateRho { i, j });
                pvalues.push(0.0);
                continue;
            }
            let t = r * (df / (1.0 - r * r)).sqrt();
            let pv = 2.0 * dist.cdf(-t.abs());
            pvalues.push(pv.clamp(0.0, 1.0));
        }
    }
    (pvalues, warnings)
}

/// Benjamini-Hochberg step-up adjustment, returned in the input order.
///
/// Sorted ascending, `q_(i) = min_{j >= i} N p_(j) / j`, clamped to 1.
pub fn fdr_adjust(pvalues: &[f64]) -> Vec<f64> {
    let n = pvalues.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pvalues[a].partial_cmp(&pvalues[b]).expect("finite p-values"));
    let mut adjusted = vec![0.0_f64; n];
    let mut running_min = 1.0_f64;
    for rank in (1..=n).rev() {
        let idx = order[rank - 1];
        // n/rank first: the rank-n factor is then exactly 1, which keeps the
        // step-up both a fixed point on constant inputs and >= the raw value.
        let q = (pvalues[idx] * (n as f64 / rank as f64)).min(1.0);
        running_min = running_min.min(q);
        adjusted[idx] = running_min;
    }
    adjusted
}

/// Which higher-criticism objective was used, with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum HcVariant {
    Dj { alpha0: f64 },
    Ls { k0: usize, k1: usize },
}

/// Result of a higher-criticism scan over sorted p-values.
#[derive(Clone, Debug, Serialize)]
pub struct HCResult {
    pub statistic: f64,
    /// Rank of the maximizer; 0 means no rank had positive evidence and
    /// nothing is selected.
    pub cut_index: usize,
    pub variant: HcVariant,
}

/// Donoho-Jin higher criticism over ranks `1 ..= floor(alpha0 * n)`:
///
/// ```text
/// HC = max_i sqrt(n) * (i/n - p_(i)) / sqrt(p_(i) (1 - p_(i)))
/// ```
///
/// P-values are clamped to `[1e-15, 1 - 1e-15]` to keep the denominator
/// finite. The first rank attaining the maximum wins; a non-positive maximum
/// means no rank beats the uniform baseline and the cut is 0.
pub fn hc_dj(pvalues_sorted: &[f64], alpha0: f64) -> Result<HCResult> {
    let n = pvalues_sorted.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha0 must be in (0, 1], got {alpha0}"
        )));
    }
    debug_assert!(pvalues_sorted.windows(2).all(|w| w[0] <= w[1]));
    let upper = (((alpha0 * n as f64).floor() as usize).max(1)).min(n);
    let nf = n as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_rank = 1usize;
    for rank in 1..=upper {
        let raw = pvalues_sorted[rank - 1];
        // At rank n with p = 1 the expression is 0/0; its continuous limit
        // is 0, which a clamped evaluation would spuriously report positive.
        let value = if raw >= 1.0 && rank == n {
            0.0
        } else {
            let p = raw.clamp(P_CLAMP, 1.0 - P_CLAMP);
            nf.sqrt() * (rank as f64 / nf - p) / (p * (1.0 - p)).sqrt()
        };
        if value > best {
            best = value;
            best_rank = rank;
        }
    }
    Ok(HCResult {
        statistic: best,
        cut_index: if best > 0.0 { best_rank } else { 0 },
        variant: HcVariant::Dj { alpha0 },
    })
}

/// Li-Siegmund higher criticism over ranks `k0 ..= k1`:
///
/// ```text
/// HC = max_k sqrt(2n) * 1{p_(k) < k/n}
///      * sqrt((k/n) log(k / (n p_(k))) - (k/n - p_(k)))
/// ```
///
/// Ranks with `p_(k) >= k/n` contribute 0. P-values are clamped from below
/// at `1e-15` so the log stays finite.
pub fn hc_ls(pvalues_sorted: &[f64], k0: usize, k1: usize) -> Result<HCResult> {
    let n = pvalues_sorted.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if k0 < 1 || k0 > k1 || k1 > n {
        return Err(Error::InvalidRange { k0, k1, n });
    }
    debug_assert!(pvalues_sorted.windows(2).all(|w| w[0] <= w[1]));
    let nf = n as f64;
    let mut best = 0.0_f64;
    let mut best_rank = 0usize;
    for rank in k0..=k1 {
        let frac = rank as f64 / nf;
        let p = pvalues_sorted[rank - 1].max(P_CLAMP);
        if p >= frac {
            continue;
        }
        let inner = (frac * (frac / p).ln() - (frac - p)).max(0.0);
        let value = (2.0 * nf).sqrt() * inner.sqrt();
        if value > best {
            best = value;
            best_rank = rank;
        }
    }
    Ok(HCResult {
        statistic: best,
        cut_index: best_rank,
        variant: HcVariant::Ls { k0, k1 },
    })
}

/// Edge selection policy. `Auto` uses a plain FDR threshold of 0.05 below
/// 1000 variables and Donoho-Jin higher criticism at or above it, where the
/// quadratic growth of the test count makes a second-level test worthwhile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionPolicy {
    Auto,
    Fdr {
        q: f64,
    },
    HcDj {
        alpha0: f64,
    },
    /// Rank bounds default to `k0 = 1`, `k1 = floor(n/2)` when `None`.
    HcLs {
        k0: Option<usize>,
        k1: Option<usize>,
    },
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy::Auto
    }
}

pub const DEFAULT_FDR_Q: f64 = 0.05;
pub const DEFAULT_HC_ALPHA0: f64 = 0.10;
/// Variable count at which `Auto` switches from FDR to higher criticism.
pub const AUTO_HC_THRESHOLD: usize = 1000;

impl SelectionPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            SelectionPolicy::Fdr { q } => {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "fdr q must be in (0, 1], got {q}"
                    )));
                }
            }
            SelectionPolicy::HcDj { alpha0 } => {
                if !(*alpha0 > 0.0 && *alpha0 <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "alpha0 must be in (0, 1], got {alpha0}"
                    )));
                }
            }
            SelectionPolicy::HcLs { k0, k1 } => {
                if let (Some(k0), Some(k1)) = (k0, k1) {
                    if *k0 < 1 || k0 > k1 {
                        return Err(Error::InvalidConfig(format!(
                            "need 1 <= k0 <= k1, got k0={k0}, k1={k1}"
                        )));
                    }
                }
            }
            SelectionPolicy::Auto => {}
        }
        Ok(())
    }

    fn resolve(&self, p: usize) -> SelectionPolicy {
        match self {
            SelectionPolicy::Auto => {
                if p < AUTO_HC_THRESHOLD {
                    SelectionPolicy::Fdr { q: DEFAULT_FDR_Q }
                } else {
                    SelectionPolicy::HcDj {
                        alpha0: DEFAULT_HC_ALPHA0,
                    }
                }
            }
            other => *other,
        }
    }
}

/// Selection decision for every canonical pair, given already-adjusted
/// p-values.
pub(crate) fn selection_mask(
    adjusted: &[f64],
    p: usize,
    policy: &SelectionPolicy,
) -> Result<(Vec<bool>, Option<HCResult>)> {
    let n = adjusted.len();
    let mut mask = vec![false; n];
    match policy.resolve(p) {
        SelectionPolicy::Fdr { q } => {
            for (m, &a) in mask.iter_mut().zip(adjusted) {
                *m = a <= q;
            }
            Ok((mask, None))
        }
        SelectionPolicy::HcDj { alpha0 } => {
            let (order, sorted) = sort_ascending(adjusted);
            let hc = hc_dj(&sorted, alpha0)?;
            for &idx in order.iter().take(hc.cut_index) {
                mask[idx] = true;
            }
            Ok((mask, Some(hc)))
        }
        SelectionPolicy::HcLs { k0, k1 } => {
            let (order, sorted) = sort_ascending(adjusted);
            let k0 = k0.unwrap_or(1);
            let k1 = k1.unwrap_or((n / 2).max(1)).min(n);
            let hc = hc_ls(&sorted, k0, k1)?;
            for &idx in order.iter().take(hc.cut_index) {
                mask[idx] = true;
            }
            Ok((mask, Some(hc)))
        }
        SelectionPolicy::Auto => unreachable!("resolve never returns Auto"),
    }
}

/// Stable ascending sort: returns (original indices in sorted order, sorted
/// values). Stability keeps tie-broken higher-criticism cuts deterministic.
fn sort_ascending(values: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let sorted = order.iter().map(|&i| values[i]).collect();
    (order, sorted)
}

/// Apply a selection policy to a group's inference result. P-values are
/// FDR-adjusted first; higher-criticism policies then scan the adjusted
/// values in ascending order and keep everything at ranks up to the cut.
pub fn select_edges(
    result: &PartialCorrelationResult,
    policy: &SelectionPolicy,
    group: impl Into<String>,
) -> Result<EdgeSet> {
    let p = result.rho.nrows();
    let adjusted = fdr_adjust(&result.pvalues);
    let (mask, _) = selection_mask(&adjusted, p, policy)?;
    let mut edges = Vec::new();
    let mut flat = 0usize;
    for i in 0..p {
        for j in (i + 1)..p {
            if mask[flat] {
                edges.push(Edge {
                    i,
                    j,
                    weight: result.rho[(i, j)],
                });
            }
            flat += 1;
        }
    }
    EdgeSet::new(group, edges)
}

/// Consensus network: edges present in every group's set, weighted by the
/// mean of the per-group weights.
pub fn shared_edges(edge_sets: &[EdgeSet]) -> EdgeSet {
    use std::collections::BTreeMap;
    let g = edge_sets.len();
    let mut tally: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
    for set in edge_sets {
        for e in &set.edges {
            let entry = tally.entry((e.i, e.j)).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += e.weight;
        }
    }
    let edges = tally
        .into_iter()
        .filter(|(_, (count, _))| *count == g && g > 0)
        .map(|((i, j), (_, sum))| Edge {
            i,
            j,
            weight: sum / g as f64,
        })
        .collect();
    EdgeSet {
        group: "shared".into(),
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pair_indexing_round_trips() {
        for p in [2usize, 3, 7, 30] {
            let mut flat = 0usize;
            for i in 0..p {
                for j in (i + 1)..p {
                    assert_eq!(pair_to_flat(p, i, j), flat);
                    assert_eq!(flat_to_pair(p, flat), (i, j));
                    flat += 1;
                }
            }
            assert_eq!(flat, pair_count(p));
        }
    }

    #[test]
    fn edge_set_normalizes_and_rejects() {
        let set = EdgeSet::new(
            "g",
            vec![
                Edge {
                    i: 3,
                    j: 1,
                    weight: 0.5,
                },
                Edge {
                    i: 0,
                    j: 2,
                    weight: -0.25,
                },
            ],
        )
        .unwrap();
        assert_eq!(set.edges[0].i, 0);
        assert_eq!(set.edges[1], Edge { i: 1, j: 3, weight: 0.5 });

        assert!(EdgeSet::new("g", vec![Edge { i: 2, j: 2, weight: 1.0 }]).is_err());
        assert!(EdgeSet::new(
            "g",
            vec![
                Edge { i: 0, j: 1, weight: 1.0 },
                Edge { i: 1, j: 0, weight: 2.0 },
            ],
        )
        .is_err());
    }

    #[test]
    fn diagonal_covariance_has_no_edges() {
        let sigma = Array2::from_diag(&ndarray::arr1(&[2.0, 0.5, 1.5]));
        let rho = partial_correlations(&sigma).unwrap();
        assert_eq!(rho, Array2::<f64>::eye(3));
    }

    #[test]
    fn two_by_two_partial_equals_marginal() {
        let sigma = array![[1.0, 0.5], [0.5, 1.0]];
        let rho = partial_correlations(&sigma).unwrap();
        assert!((rho[(0, 1)] - 0.5).abs() < 1e-12);
        assert_eq!(rho[(0, 0)], 1.0);
    }

    /// Test-only Gauss-Jordan inversion, independent of the Cholesky path.
    fn gauss_jordan(a: &Array2<f64>) -> Array2<f64> {
        let p = a.nrows();
        let mut work = a.clone();
        let mut inv = Array2::<f64>::eye(p);
        for col in 0..p {
            let pivot = work[(col, col)];
            for j in 0..p {
                work[(col, j)] /= pivot;
                inv[(col, j)] /= pivot;
            }
            for row in 0..p {
                if row != col {
                    let factor = work[(row, col)];
                    for j in 0..p {
                        let (w, v) = (work[(col, j)], inv[(col, j)]);
                        work[(row, j)] -= factor * w;
                        inv[(row, j)] -= factor * v;
                    }
                }
            }
        }
        inv
    }

    fn random_spd(p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((p, p), |_| rng.random_range(-1.0..1.0));
        let mut a = m.t().dot(&m);
        for i in 0..p {
            a[(i, i)] += p as f64 * 0.5;
        }
        crate::linalg::symmetrize(&mut a);
        a
    }

    #[test]
    fn partial_correlations_match_gauss_jordan() {
        let sigma = random_spd(10, 99);
        let rho = partial_correlations(&sigma).unwrap();
        let omega = gauss_jordan(&sigma);
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j {
                    1.0
                } else {
                    -omega[(i, j)] / (omega[(i, i)] * omega[(j, j)]).sqrt()
                };
                assert!(
                    (rho[(i, j)] - expected).abs() < 1e-10,
                    "({i},{j}): {} vs {expected}",
                    rho[(i, j)]
                );
            }
        }
    }

    #[test]
    fn partial_correlations_recover_sparse_support() {
        // Build Sigma from a known sparse precision; nonzero partials must
        // appear exactly at its off-diagonal support.
        let p = 8;
        let mut theta = Array2::<f64>::eye(p);
        for &(i, j, v) in &[(0usize, 3usize, 0.4), (1, 2, -0.3), (4, 7, 0.25)] {
            theta[(i, j)] = v;
            theta[(j, i)] = v;
        }
        let sigma = gauss_jordan(&theta);
        let mut symmetric = sigma.clone();
        crate::linalg::symmetrize(&mut symmetric);
        let rho = partial_correlations(&symmetric).unwrap();
        for i in 0..p {
            for j in (i + 1)..p {
                let expected = -theta[(i, j)];
                if expected != 0.0 {
                    assert!((rho[(i, j)] - expected).abs() < 1e-8);
                } else {
                    assert!(rho[(i, j)].abs() < 1e-8, "spurious edge at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let mut sigma = Array2::<f64>::ones((3, 3));
        sigma[(0, 0)] = 1.0;
        assert!(matches!(
            partial_correlations(&sigma),
            Err(crate::Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn pvalue_for_zero_rho_is_one() {
        let mut rho = Array2::<f64>::eye(3);
        rho[(0, 1)] = 0.0;
        let (pvals, warnings) = edge_pvalues(&rho, 50);
        assert_eq!(pvals, vec![1.0, 1.0, 1.0]);
        assert!(warnings.is_empty());
    }

    #[test]
    fn pvalue_shrinks_as_rho_grows() {
        let mut previous = 1.0;
        for &r in &[0.1, 0.3, 0.5, 0.7, 0.9, 0.999] {
            let mut rho = Array2::<f64>::eye(2);
            rho[(0, 1)] = r;
            rho[(1, 0)] = r;
            let (pvals, _) = edge_pvalues(&rho, 40);
            assert!(pvals[0] < previous, "p not decreasing at rho = {r}");
            previous = pvals[0];
        }
        assert!(previous < 1e-20);
    }

    #[test]
    fn degenerate_rho_warns_and_zeroes() {
        let mut rho = Array2::<f64>::eye(2);
        rho[(0, 1)] = 1.0;
        rho[(1, 0)] = 1.0;
        let (pvals, warnings) = edge_pvalues(&rho, 40);
        assert_eq!(pvals[0], 0.0);
        assert_eq!(
            warnings,
            vec![InferenceWarning::DegenerateRho { i: 0, j: 1 }]
        );
    }

    #[test]
    fn df_floor_warns_when_n_small() {
        let rho = Array2::<f64>::eye(5);
        let (_, warnings) = edge_pvalues(&rho, 5);
        assert_eq!(warnings, vec![InferenceWarning::DfFloored { n: 5, p: 5 }]);
    }

    /// Two-sided t-test p-value by Simpson quadrature of the unnormalized
    /// density, fully independent of the distribution library.
    fn pvalue_by_quadrature(t: f64, df: f64) -> f64 {
        let density = |x: f64| (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let simpson = |a: f64, b: f64, steps: usize| {
            let h = (b - a) / steps as f64;
            let mut sum = density(a) + density(b);
            for k in 1..steps {
                let x = a + k as f64 * h;
                sum += if k % 2 == 1 { 4.0 } else { 2.0 } * density(x);
            }
            sum * h / 3.0
        };
        let limit = 400.0;
        let total = simpson(-limit, limit, 800_000);
        let tail = simpson(t.abs(), limit, 800_000);
        2.0 * tail / total
    }

    #[test]
    fn pvalue_matches_quadrature_oracle() {
        // rho = 0.3 with df = 48 (n = 50 over p = 2 variables).
        let mut rho = Array2::<f64>::eye(2);
        rho[(0, 1)] = 0.3;
        rho[(1, 0)] = 0.3;
        let (pvals, _) = edge_pvalues(&rho, 50);
        let t = 0.3 * (48.0_f64 / (1.0 - 0.09)).sqrt();
        let expected = pvalue_by_quadrature(t, 48.0);
        assert!(
            (pvals[0] - expected).abs() < 1e-8,
            "{} vs quadrature {expected}",
            pvals[0]
        );
    }

    #[test]
    fn pvalue_matches_cauchy_at_df_one() {
        // df floors to 1 when n <= p; the t distribution is then Cauchy with
        // closed-form tail 1 - (2/pi) atan(|t|).
        let mut rho = Array2::<f64>::eye(4);
        rho[(0, 1)] = 0.5;
        rho[(1, 0)] = 0.5;
        let (pvals, _) = edge_pvalues(&rho, 4);
        let t = 0.5 * (1.0 / 0.75_f64).sqrt();
        let expected = 1.0 - 2.0 / std::f64::consts::PI * t.atan();
        assert!((pvals[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn fdr_constant_list_is_fixed_point() {
        let adjusted = fdr_adjust(&[0.2, 0.2, 0.2]);
        assert_eq!(adjusted, vec![0.2, 0.2, 0.2]);
    }

    #[test]
    fn fdr_hand_example() {
        let adjusted = fdr_adjust(&[0.01, 0.02, 0.03, 0.04]);
        for v in &adjusted {
            assert!((v - 0.04).abs() < 1e-15, "expected 0.04, got {v}");
        }
    }

    #[test]
    fn fdr_monotone_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
        let adjusted = fdr_adjust(&raw);
        for (r, a) in raw.iter().zip(&adjusted) {
            assert!(a >= r && *a <= 1.0);
        }
        // Order preservation: sorting raw and adjusted gives the same ranks.
        let mut order_raw: Vec<usize> = (0..raw.len()).collect();
        order_raw.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap());
        for w in order_raw.windows(2) {
            assert!(adjusted[w[0]] <= adjusted[w[1]]);
        }
    }

    #[test]
    fn hc_dj_uniform_boundary_selects_nothing() {
        let n = 20;
        let pvals: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
        let hc = hc_dj(&pvals, 1.0).unwrap();
        assert_eq!(hc.statistic, 0.0);
        assert_eq!(hc.cut_index, 0);
    }

    #[test]
    fn hc_dj_matches_direct_evaluation() {
        let pvals = [0.001, 0.2, 0.4, 0.6, 0.8];
        let hc = hc_dj(&pvals, 1.0).unwrap();
        let n = 5.0_f64;
        let mut expected = f64::NEG_INFINITY;
        let mut expected_rank = 0usize;
        for (idx, &p) in pvals.iter().enumerate() {
            let value = n.sqrt() * ((idx as f64 + 1.0) / n - p) / (p * (1.0 - p)).sqrt();
            if value > expected {
                expected = value;
                expected_rank = idx + 1;
            }
        }
        assert!((hc.statistic - expected).abs() < 1e-12);
        assert_eq!(hc.cut_index, expected_rank);
        assert!(matches!(hc.variant, HcVariant::Dj { alpha0 } if alpha0 == 1.0));
    }

    #[test]
    fn hc_dj_respects_alpha0_range() {
        // With alpha0 = 0.4 only the first two ranks are scanned, so the
        // strong signal at rank 3 must not set the cut.
        let pvals = [0.5, 0.6, 1e-9, 1e-8, 1e-7];
        let mut sorted = pvals;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let full = hc_dj(&sorted, 1.0).unwrap();
        let limited = hc_dj(&sorted, 0.4).unwrap();
        assert!(limited.cut_index <= 2);
        assert!(full.statistic >= limited.statistic);
    }

    #[test]
    fn hc_dj_rejects_bad_input() {
        assert!(matches!(hc_dj(&[], 0.5), Err(crate::Error::EmptyInput)));
        assert!(hc_dj(&[0.5], 0.0).is_err());
        assert!(hc_dj(&[0.5], 1.5).is_err());
    }

    #[test]
    fn hc_dj_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut pvals: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0)).collect();
        pvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let first = hc_dj(&pvals, 0.1).unwrap();
        let second = hc_dj(&pvals, 0.1).unwrap();
        assert_eq!(first.statistic.to_bits(), second.statistic.to_bits());
        assert_eq!(first.cut_index, second.cut_index);
    }

    #[test]
    fn hc_ls_indicator_kills_everything() {
        let pvals = [0.5, 0.6, 0.9, 1.0];
        let hc = hc_ls(&pvals, 1, 4).unwrap();
        assert_eq!(hc.statistic, 0.0);
        assert_eq!(hc.cut_index, 0);
    }

    #[test]
    fn hc_ls_single_active_term() {
        let pvals = [0.01, 0.3, 0.6, 0.9];
        let hc = hc_ls(&pvals, 1, 4).unwrap();
        // Rank 1 dominates: sqrt(8) * sqrt(0.25 ln 25 - 0.24).
        let expected = 8.0_f64.sqrt() * (0.25 * 25.0_f64.ln() - 0.24).sqrt();
        assert!(
            (hc.statistic - expected).abs() < 1e-12,
            "{} vs {expected}",
            hc.statistic
        );
        assert_eq!(hc.cut_index, 1);
    }

    #[test]
    fn hc_ls_matches_full_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut pvals: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0_f64).powi(3)).collect();
        pvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = pvals.len() as f64;
        let hc = hc_ls(&pvals, 1, 150).unwrap();
        let mut best = 0.0_f64;
        for k in 1..=150usize {
            let frac = k as f64 / n;
            let p = pvals[k - 1].max(1e-15);
            if p < frac {
                let inner = (frac * (frac / p).ln() - (frac - p)).max(0.0);
                best = best.max((2.0 * n).sqrt() * inner.sqrt());
            }
        }
        assert!((hc.statistic - best).abs() < 1e-12);
    }

    #[test]
    fn hc_ls_rejects_bad_ranges() {
        assert!(matches!(
            hc_ls(&[0.1, 0.2], 0, 2),
            Err(crate::Error::InvalidRange { .. })
        ));
        assert!(hc_ls(&[0.1, 0.2], 2, 1).is_err());
        assert!(hc_ls(&[0.1, 0.2], 1, 3).is_err());
    }

    fn synthetic_result(pvalues: Vec<f64>, p: usize) -> PartialCorrelationResult {
        let mut rho = Array2::<f64>::eye(p);
        let mut flat = 0usize;
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 1.0 - pvalues[flat];
                rho[(i, j)] = v * 0.5;
                rho[(j, i)] = v * 0.5;
                flat += 1;
            }
        }
        PartialCorrelationResult {
            rho,
            pvalues,
            n_effective: 100,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn select_nothing_when_everything_is_null() {
        let p = 6;
        let result = synthetic_result(vec![1.0; pair_count(p)], p);
        for policy in [
            SelectionPolicy::Auto,
            SelectionPolicy::Fdr { q: 0.05 },
            SelectionPolicy::HcDj { alpha0: 0.1 },
            SelectionPolicy::HcLs { k0: None, k1: None },
        ] {
            let set = select_edges(&result, &policy, "g").unwrap();
            assert!(set.is_empty(), "policy {policy:?} selected something");
        }
    }

    #[test]
    fn select_everything_at_fdr_one() {
        let p = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pvalues: Vec<f64> = (0..pair_count(p))
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let result = synthetic_result(pvalues, p);
        let set = select_edges(&result, &SelectionPolicy::Fdr { q: 1.0 }, "g").unwrap();
        assert_eq!(set.len(), pair_count(p));
    }

    #[test]
    fn select_fdr_keeps_hand_example() {
        // Four tests adjusted to 0.04 each: all pass at q = 0.05.
        let result = synthetic_result(vec![0.01, 0.02, 0.03, 0.04, 1.0, 1.0], 4);
        let set = select_edges(&result, &SelectionPolicy::Fdr { q: 0.05 }, "g").unwrap();
        // Adjusted values: the four small ones become 0.06/0.06/0.06/0.06?
        // No: N = 6 here, ranks 1..4 give 6*0.04/4 = 0.06 > 0.05, so check
        // the exact step-up instead of guessing.
        let adjusted = fdr_adjust(&result.pvalues);
        let expected = adjusted.iter().filter(|&&a| a <= 0.05).count();
        assert_eq!(set.len(), expected);
    }

    #[test]
    fn hc_selection_is_subset_of_fdr_at_cut() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = 40;
        let n_pairs = pair_count(p);
        let mut pvalues: Vec<f64> = (0..n_pairs).map(|_| rng.random_range(0.0..1.0)).collect();
        for slot in pvalues.iter_mut().take(30) {
            *slot = rng.random_range(0.0..1e-8);
        }
        let result = synthetic_result(pvalues, p);
        let hc_set = select_edges(&result, &SelectionPolicy::HcDj { alpha0: 0.1 }, "g").unwrap();
        let adjusted = fdr_adjust(&result.pvalues);
        let hc_pairs = hc_set.pairs();
        if hc_set.is_empty() {
            return;
        }
        let q_at_cut = hc_pairs
            .iter()
            .map(|&(i, j)| adjusted[pair_to_flat(p, i, j)])
            .fold(0.0_f64, f64::max);
        let fdr_set = select_edges(&result, &SelectionPolicy::Fdr { q: q_at_cut }, "g").unwrap();
        assert!(
            hc_pairs.is_subset(&fdr_set.pairs()),
            "HC must prune from the FDR-ordered list, never add"
        );
    }

    #[test]
    fn shared_edges_intersection() {
        let a = EdgeSet::new(
            "a",
            vec![
                Edge { i: 0, j: 1, weight: 0.2 },
                Edge { i: 1, j: 2, weight: 0.4 },
            ],
        )
        .unwrap();
        let b = EdgeSet::new(
            "b",
            vec![
                Edge { i: 0, j: 1, weight: 0.4 },
                Edge { i: 2, j: 3, weight: 0.5 },
            ],
        )
        .unwrap();
        let shared = shared_edges(&[a.clone(), b.clone()]);
        assert_eq!(shared.len(), 1);
        assert_eq!(shared.edges[0].i, 0);
        assert_eq!(shared.edges[0].j, 1);
        assert!((shared.edges[0].weight - 0.3).abs() < 1e-15);
        assert_eq!(shared.group, "shared");

        let same = shared_edges(&[a.clone(), a.clone()]);
        assert_eq!(same.pairs(), a.pairs());

        let disjoint = shared_edges(&[
            a,
            EdgeSet::new("c", vec![Edge { i: 5, j: 6, weight: 1.0 }]).unwrap(),
        ]);
        assert!(disjoint.is_empty());
    }

    #[test]
    fn shared_edges_matches_brute_force_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut sets = Vec::new();
        for g in 0..3 {
            let mut edges = Vec::new();
            for i in 0..10usize {
                for j in (i + 1)..10 {
                    if rng.random_range(0.0..1.0) < 0.4 {
                        edges.push(Edge {
                            i,
                            j,
                            weight: rng.random_range(-1.0..1.0),
                        });
                    }
                }
            }
            sets.push(EdgeSet::new(format!("g{g}"), edges).unwrap());
        }
        let shared = shared_edges(&sets);
        let brute: std::collections::BTreeSet<(usize, usize)> = sets[0]
            .pairs()
            .intersection(&sets[1].pairs())
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .intersection(&sets[2].pairs())
            .copied()
            .collect();
        assert_eq!(shared.pairs(), brute);
    }
}
