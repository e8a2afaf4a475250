//! Dense linear-algebra kernels.
//!
//! Every reduction sums in ascending index order, so results are bitwise
//! reproducible across runs and thread counts.

mod eigen;
mod matrix;
mod spd;
mod svd;

pub use eigen::{sym_eigen, EigenDecomposition, JACOBI_MAX_SWEEPS};
pub use matrix::DenseMatrix;
pub use spd::{solve_spd, SpdFactor};
pub use svd::{svd, SvdResult};

use crate::error::{DsfError, Result};

/// `A · B`.
///
/// Each output entry accumulates `A[i,k]·B[k,j]` for ascending `k`, the same
/// order as the textbook triple loop. Zero entries of `A` are skipped, which
/// leaves every sum unchanged.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(DsfError::shape(format!(
            "matmul {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (n, m) = (a.rows(), b.cols());
    let mut out = vec![0.0; n * m];
    for (i, out_row) in out.chunks_exact_mut(m.max(1)).enumerate().take(n) {
        for (k, &aik) in a.row(i).iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            axpy(out_row, aik, b.row(k));
        }
    }
    finish(n, m, out, "matmul")
}

/// `Aᵀ · B` without materializing the transpose.
pub fn matmul_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(DsfError::shape(format!(
            "matmul_tn {:?}ᵀ x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let (n, m) = (a.cols(), b.cols());
    let mut out = vec![0.0; n * m];
    for k in 0..a.rows() {
        let brow = b.row(k);
        for (i, &aki) in a.row(k).iter().enumerate() {
            if aki == 0.0 {
                continue;
            }
            axpy(&mut out[i * m..(i + 1) * m], aki, brow);
        }
    }
    finish(n, m, out, "matmul_tn")
}

/// `A · Bᵀ` as row-by-row dot products.
pub fn matmul_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(DsfError::shape(format!(
            "matmul_nt {:?} x {:?}ᵀ",
            a.shape(),
            b.shape()
        )));
    }
    let (n, m) = (a.rows(), b.rows());
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        let ar = a.row(i);
        for j in 0..m {
            out.push(dot(ar, b.row(j)));
        }
    }
    finish(n, m, out, "matmul_nt")
}

/// Gram matrix `XᵀX`, symmetrized exactly.
pub fn gram(x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.is_empty() {
        return Err(DsfError::pre("gram of an empty matrix"));
    }
    Ok(matmul_tn(x, x)?.symmetrized())
}

/// Frobenius norm of `A − B`.
pub fn frobenius_error(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(DsfError::shape(format!(
            "frobenius_error {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut acc = 0.0;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn finish(rows: usize, cols: usize, data: Vec<f64>, what: &'static str) -> Result<DenseMatrix> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(DsfError::Numerical {
            what,
            residual: f64::INFINITY,
        });
    }
    Ok(DenseMatrix::from_raw(rows, cols, data))
}
