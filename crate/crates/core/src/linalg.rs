//! Dense symmetric linear algebra: Cholesky factorization, SPD inversion,
//! and Frobenius-space helpers.
//!
//! Everything here is plain-loop f64 with deterministic summation order, so
//! results are bit-stable across runs and thread counts. Matrix sizes in this
//! crate top out at a few thousand, where these routines are more than fast
//! enough and avoid a LAPACK build dependency.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Relative pivot tolerance for declaring a matrix singular.
const PIVOT_RTOL: f64 = 1e-12;

/// Sum of squared entries.
pub fn frobenius_norm_sq(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Frobenius inner product `<a, b> = sum_ij a_ij b_ij`.
pub fn frobenius_inner(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
///
/// Fails with [`Error::SingularMatrix`] when a pivot falls below
/// `1e-12 * ||A||_F`, which covers both indefiniteness and numerical rank
/// deficiency.
pub fn cholesky(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let p = a.nrows();
    if a.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            p,
            a.ncols()
        )));
    }
    let tol = PIVOT_RTOL * frobenius_norm_sq(a).sqrt();
    // Flat row-major scratch; only the lower triangle is written.
    let mut l = vec![0.0_f64; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if sum <= tol {
                    return Err(Error::SingularMatrix {
                        pivot: sum,
                        tolerance: tol,
                    });
                }
                l[i * p + i] = sum.sqrt();
            } else {
                l[i * p + j] = sum / l[j * p + j];
            }
        }
    }
    Ok(Array2::from_shape_vec((p, p), l).expect("shape"))
}

/// Invert a symmetric positive definite matrix via its Cholesky factor:
/// `A^{-1} = L^{-T} L^{-1}`. The result is exactly symmetric.
pub fn invert_spd(a: &ArrayView2<f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    let p = l.nrows();
    let l = l.as_slice().expect("contiguous");

    // Invert the lower-triangular factor in place: M = L^{-1}.
    let mut m = vec![0.0_f64; p * p];
    for i in 0..p {
        m[i * p + i] = 1.0 / l[i * p + i];
        for j in 0..i {
            let mut sum = 0.0;
            for k in j..i {
                sum += l[i * p + k] * m[k * p + j];
            }
            m[i * p + j] = -sum / l[i * p + i];
        }
    }

    // A^{-1}[i][j] = sum_{k >= max(i,j)} M[k][i] * M[k][j]; fill the lower
    // triangle and mirror so the output is symmetric to the bit.
    let mut inv = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in i..p {
                sum += m[k * p + i] * m[k * p + j];
            }
            inv[(i, j)] = sum;
            inv[(j, i)] = sum;
        }
    }
    Ok(inv)
}

/// Solve `L^T x = b` for `x` by back substitution, `L` lower triangular.
pub fn solve_lower_transposed(l: &ArrayView2<f64>, b: &[f64], x: &mut [f64]) {
    let p = b.len();
    debug_assert_eq!(l.nrows(), p);
    for i in (0..p).rev() {
        let mut sum = b[i];
        for k in (i + 1)..p {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
}

/// Mirror the lower triangle onto the upper one so the matrix is exactly
/// symmetric.
pub fn symmetrize(a: &mut Array2<f64>) {
    let p = a.nrows();
    for i in 0..p {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Largest absolute asymmetry `max |a_ij - a_ji|`.
pub fn max_asymmetry(a: &ArrayView2<f64>) -> f64 {
    let p = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..p {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spd_example() -> Array2<f64> {
        array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]]
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = spd_example();
        let l = cholesky(&a.view()).unwrap();
        let back = l.dot(&l.t());
        for (x, y) in a.iter().zip(back.iter()) {
            assert!((x - y).abs() < 1e-12, "reconstruction off: {x} vs {y}");
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            cholesky(&a.view()),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn inverse_matches_gauss_jordan() {
        let a = spd_example();
        let inv = invert_spd(&a.view()).unwrap();
        let gj = gauss_jordan(&a);
        for (x, y) in inv.iter().zip(gj.iter()) {
            assert!((x - y).abs() < 1e-12, "inverse mismatch: {x} vs {y}");
        }
        // Exact symmetry of the output.
        assert_eq!(max_asymmetry(&inv.view()), 0.0);
    }

    #[test]
    fn solve_lt_roundtrip() {
        let a = spd_example();
        let l = cholesky(&a.view()).unwrap();
        let b = [1.0, -2.0, 0.5];
        let mut x = [0.0; 3];
        solve_lower_transposed(&l.view(), &b, &mut x);
        // L^T x should give back b.
        let lt = l.t();
        for i in 0..3 {
            let got: f64 = (0..3).map(|j| lt[(i, j)] * x[j]).sum();
            assert!((got - b[i]).abs() < 1e-12);
        }
    }

    /// Independent full-pivot-free Gauss-Jordan inversion, test-only.
    fn gauss_jordan(a: &Array2<f64>) -> Array2<f64> {
        let p = a.nrows();
        let mut work = a.clone();
        let mut inv = Array2::<f64>::eye(p);
        for col in 0..p {
            let pivot = work[(col, col)];
            assert!(pivot.abs() > 1e-14, "gauss-jordan pivot too small");
            for j in 0..p {
                work[(col, j)] /= pivot;
                inv[(col, j)] /= pivot;
            }
            for row in 0..p {
                if row == col {
                    continue;
                }
                let factor = work[(row, col)];
                for j in 0..p {
                    let w = work[(col, j)];
                    let v = inv[(col, j)];
                    work[(row, j)] -= factor * w;
                    inv[(row, j)] -= factor * v;
                }
            }
        }
        inv
    }
}
