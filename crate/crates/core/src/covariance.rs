//! Observation matrices, standardization, and sample covariance.
//!
//! All estimators in this crate use the unbiased `n - 1` divisor, and the
//! per-observation contribution matrices defined here are the raw material
//! for the Frobenius variance estimates in [`crate::shrinkage`].

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// A dense `n x p` matrix of finite observations (rows) over variables
/// (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    /// Wrap a matrix, rejecting NaN/Inf entries and empty shapes.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyInput);
        }
        for ((row, col), v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row, col });
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }
}

/// Per-group observation matrices over a common variable set.
///
/// Invariants enforced at construction: at least two groups, a common column
/// count and order, and at least three observations per group (the variance
/// estimator divides by `(n-1)^2 (n-2)`).
#[derive(Clone, Debug)]
pub struct GroupedDataset {
    groups: Vec<DataMatrix>,
    variable_names: Vec<String>,
    group_names: Vec<String>,
}

impl GroupedDataset {
    pub fn new(
        groups: Vec<DataMatrix>,
        variable_names: Vec<String>,
        group_names: Vec<String>,
    ) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::SingleGroup);
        }
        if group_names.len() != groups.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} groups but {} group names",
                groups.len(),
                group_names.len()
            )));
        }
        let p = groups[0].p();
        if variable_names.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} variables but {} variable names",
                p,
                variable_names.len()
            )));
        }
        for (g, m) in groups.iter().enumerate() {
            if m.p() != p {
                return Err(Error::DimensionMismatch(format!(
                    "group '{}' has {} variables, expected {}",
                    group_names[g],
                    m.p(),
                    p
                )));
            }
            if m.n() < 3 {
                return Err(Error::GroupTooSmall {
                    name: group_names[g].clone(),
                    n: m.n(),
                });
            }
        }
        Ok(Self {
            groups,
            variable_names,
            group_names,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn n_variables(&self) -> usize {
        self.groups[0].p()
    }

    pub fn groups(&self) -> &[DataMatrix] {
        &self.groups
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }
}

/// A sample covariance matrix together with the observation count it came
/// from.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub matrix: Array2<f64>,
    pub n: usize,
}

impl CovarianceEstimate {
    pub fn p(&self) -> usize {
        self.matrix.nrows()
    }
}

fn column_means(values: &ArrayView2<f64>) -> Array1<f64> {
    let n = values.nrows() as f64;
    values.sum_axis(ndarray::Axis(0)) / n
}

/// Center and scale every column to mean 0 and unit sample variance
/// (divisor `n - 1`).
///
/// Shrinking toward the identity target only makes sense on a common scale,
/// so the pipeline applies this by default; it is idempotent and leaves
/// partial correlations unchanged.
pub fn standardize(data: &DataMatrix) -> Result<DataMatrix> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InsufficientObservations {
            required: 2,
            actual: n,
        });
    }
    let values = data.values();
    let means = column_means(&values.view());
    let mut out = values.clone();
    for (col, mut column) in out.columns_mut().into_iter().enumerate() {
        let mean = means[col];
        let var: f64 =
            column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
        if var <= 0.0 {
            return Err(Error::ZeroVarianceColumn(col));
        }
        let sd = var.sqrt();
        column.mapv_inplace(|v| (v - mean) / sd);
    }
    DataMatrix::new(out)
}

/// Unbiased sample covariance `(1/(n-1)) sum_k (x_k - xbar)(x_k - xbar)^T`.
///
/// The result is symmetrized exactly so downstream arithmetic is bit-stable.
pub fn sample_covariance(data: &DataMatrix) -> Result<CovarianceEstimate> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InsufficientObservations {
            required: 2,
            actual: n,
        });
    }
    let centered = centered_values(data);
    let mut matrix = centered.t().dot(&centered);
    matrix.mapv_inplace(|v| v / (n as f64 - 1.0));
    crate::linalg::symmetrize(&mut matrix);
    Ok(CovarianceEstimate { matrix, n })
}

/// The mean-centered copy of the observations.
pub(crate) fn centered_values(data: &DataMatrix) -> Array2<f64> {
    let values = data.values();
    let means = column_means(&values.view());
    let mut centered = values.clone();
    for mut row in centered.rows_mut() {
        row -= &means;
    }
    centered
}

/// Per-observation covariance contributions `w_k = (x_k - xbar)(x_k - xbar)^T`.
///
/// Their average times `n/(n-1)` reconstructs [`sample_covariance`]; the
/// deviations of the `w_k` around that average drive the variance estimate of
/// the covariance itself. This materializes `n` dense `p x p` matrices, so it
/// is meant for moderate sizes; the estimation pipeline uses an algebraically
/// identical streaming form instead.
pub fn observation_contributions(data: &DataMatrix) -> Result<Vec<Array2<f64>>> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InsufficientObservations {
            required: 2,
            actual: n,
        });
    }
    let centered = centered_values(data);
    let p = data.p();
    let mut out = Vec::with_capacity(n);
    for row in centered.rows() {
        let mut w = Array2::<f64>::zeros((p, p));
        for i in 0..p {
            for j in 0..p {
                w[(i, j)] = row[i] * row[j];
            }
        }
        out.push(w);
    }
    Ok(out)
}
