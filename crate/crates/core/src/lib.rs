//! Joint Gaussian graphical model estimation across related sample groups.
//!
//! The estimator is a two-target linear shrinkage (TTLS) of each group's
//! sample covariance matrix: a convex combination of the group's own sample
//! covariance, a shared target built from the remaining groups, and the
//! identity matrix. Shrinkage intensities are chosen by exact minimization of
//! an unbiased estimate of the Frobenius risk, in the style of Ledoit & Wolf
//! (2004) and the multi-target extension of Lancewicki & Aladjem (2014).
//!
//! On top of the shrunk covariances the crate provides the full network
//! inference stack — precision matrices, partial correlations, t-tests with
//! Benjamini–Hochberg adjustment, and higher-criticism edge selection
//! (Donoho & Jin 2004; Li & Siegmund 2015) — plus a joint-network simulator
//! and a benchmark harness for recovery sweeps and timing runs.
//!
//! Per-group work is data-parallel via rayon when the default `parallel`
//! feature is enabled; results are identical under any schedule because no
//! cross-group reduction depends on execution order. Disabling the feature
//! falls back to sequential loops with the same API.

pub mod bench;
pub mod covariance;
pub mod error;
pub mod exec;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod shrinkage;
pub mod simulate;

pub use error::{Error, Result};
pub use exec::Execution;
