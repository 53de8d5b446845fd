//! Dense helpers over nalgebra: sorted symmetric eigendecomposition and the
//! interleaved boson (x) spin embedding used throughout.

use nalgebra::{DMatrix, Matrix2};

use crate::{Error, Result};

/// Eigendecomposition of a real symmetric matrix with eigenvalues ascending
/// and eigenvector columns permuted to match.
pub fn symmetric_eigen_sorted(mat: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !mat.is_square() {
        return Err(Error::Eigensolve("matrix is not square".into()));
    }
    let n = mat.nrows();
    let se = mat.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[a]
            .partial_cmp(&se.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolve("non-finite eigenvalue".into()));
    }
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Largest absolute entry.
pub fn max_abs(mat: &DMatrix<f64>) -> f64 {
    mat.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// ||A - A^T||_max.
pub fn symmetry_residual(mat: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..mat.nrows() {
        for j in (i + 1)..mat.ncols() {
            worst = worst.max((mat[(i, j)] - mat[(j, i)]).abs());
        }
    }
    worst
}

/// ||V^T V - I||_max.
pub fn orthonormality_residual(v: &DMatrix<f64>) -> f64 {
    let mut gram = v.transpose() * v;
    for i in 0..gram.nrows() {
        gram[(i, i)] -= 1.0;
    }
    max_abs(&gram)
}

/// Interleaved Kronecker product F (x) S with S a 2x2 spin block:
/// row index 2p + a, column index 2q + b maps to F[p,q] * S[a,b].
pub fn spin_kron(fock: &DMatrix<f64>, spin: &Matrix2<f64>) -> DMatrix<f64> {
    let n = fock.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for q in 0..n {
        for p in 0..n {
            let f = fock[(p, q)];
            if f == 0.0 {
                continue;
            }
            for b in 0..2 {
                for a in 0..2 {
                    let s = spin[(a, b)];
                    if s != 0.0 {
                        out[(2 * p + a, 2 * q + b)] = f * s;
                    }
                }
            }
        }
    }
    out
}
