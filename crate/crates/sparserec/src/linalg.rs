//! Small dense linear-algebra helpers: seeded Gaussian sampling,
//! Gram-Schmidt orthogonalization and an SPD Cholesky solver.
//!
//! These are deliberately plain implementations; every matrix here is
//! desk-scale and the callers' contracts are verified against independent
//! oracles in the test suites.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Deterministic RNG used everywhere a seed appears in an API.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Samples an `rows x cols` matrix of iid standard normals from `rng`.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let normal = StandardNormal;
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

/// Samples a length-`n` vector of iid standard normals from `rng`.
pub fn gaussian_vector(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let normal = StandardNormal;
    Array1::from_shape_fn(n, |_| normal.sample(rng))
}

/// Orthonormalizes the columns of `m` in place with modified Gram-Schmidt,
/// run twice for numerical robustness. Requires rows >= cols and full
/// column rank (guaranteed a.s. for Gaussian input).
pub fn orthonormalize_columns(m: &mut Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    if rows < cols {
        return Err(Error::Parameter(format!(
            "cannot orthonormalize {cols} columns in {rows} dimensions"
        )));
    }
    for _pass in 0..2 {
        for j in 0..cols {
            for i in 0..j {
                let proj = {
                    let ci = m.column(i);
                    let cj = m.column(j);
                    ci.dot(&cj)
                };
                let ci = m.column(i).to_owned();
                m.column_mut(j).scaled_add(-proj, &ci);
            }
            let norm = m.column(j).dot(&m.column(j)).sqrt();
            if norm == 0.0 {
                return Err(Error::Data(
                    "rank-deficient matrix in orthonormalization".into(),
                ));
            }
            m.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    Ok(())
}

/// Cholesky factorization of a symmetric positive-definite matrix.
/// Returns the lower factor L with A = L Lᵀ.
pub fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("cholesky requires a square matrix".into()));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Data(format!(
                        "matrix not positive definite at pivot {i} (value {sum:e})"
                    )));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves L Lᵀ x = b given the lower Cholesky factor.
pub fn cholesky_solve_vec(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[[i, k]] * v;
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = y[k];
            y[i] -= l[[k, i]] * v;
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Solves A X = B column-by-column for SPD `A`, with one iterative
/// refinement pass per column to push the relative residual toward
/// machine precision.
pub fn spd_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    let (n, m) = b.dim();
    let mut x = Array2::<f64>::zeros((n, m));
    for j in 0..m {
        let bj = b.column(j).to_owned();
        let mut xj = cholesky_solve_vec(&l, &bj);
        // one refinement step: solve A d = b - A x, x += d
        let r = &bj - &a.dot(&xj);
        let d = cholesky_solve_vec(&l, &r);
        xj += &d;
        x.column_mut(j).assign(&xj);
    }
    Ok(x)
}

/// Euclidean norm of a vector.
pub fn norm2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Frobenius norm of a matrix.
pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}
