use super::matrix::DenseMatrix;
use crate::error::{DsfError, Result};

/// Hard cap on cyclic Jacobi sweeps.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Convergence threshold on the off-diagonal norm, relative to `‖S‖_F`.
const OFF_DIAG_TOL: f64 = 1e-12;

/// `S = Q · diag(eigvals) · Qᵀ` with eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub q: DenseMatrix,
    pub eigvals: Vec<f64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    /// Rebuilds `Q · diag(eigvals) · Qᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dim();
        let scaled = DenseMatrix::from_fn(n, n, |i, j| self.q.get(i, j) * self.eigvals[j]);
        super::matmul_nt(&scaled, &self.q).expect("square factors")
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// The input is symmetrized first; asymmetry beyond `1e-8·‖S‖_F` is rejected.
pub fn sym_eigen(s: &DenseMatrix) -> Result<EigenDecomposition> {
    if !s.is_square() {
        return Err(DsfError::shape(format!("sym_eigen of {:?}", s.shape())));
    }
    let n = s.rows();
    let norm = s.frobenius_norm();
    let asym = super::frobenius_error(s, &s.transpose())?;
    if asym > 1e-8 * norm {
        return Err(DsfError::pre(format!(
            "matrix is not symmetric (‖S−Sᵀ‖ = {asym:.3e})"
        )));
    }

    let mut a = s.symmetrized().into_vec();
    // Rows of `vt` are the eigenvectors.
    let mut vt = DenseMatrix::identity(n).into_vec();
    let threshold = OFF_DIAG_TOL * norm;
    let elem_tol = if n > 0 { threshold / n as f64 } else { 0.0 };

    let mut converged = false;
    let mut off = off_diagonal_norm(&a, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= elem_tol {
                    continue;
                }
                rotate(&mut a, &mut vt, n, p, q);
            }
        }
        off = off_diagonal_norm(&a, n);
    }
    if !converged && off > threshold {
        return Err(DsfError::Numerical {
            what: "sym_eigen",
            residual: off,
        });
    }

    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]).then(x.cmp(&y)));

    let eigvals: Vec<f64> = order.iter().map(|&k| diag[k]).collect();
    let q = DenseMatrix::from_fn(n, n, |i, col| vt[order[col] * n + i]);
    if !q.is_finite() || eigvals.iter().any(|v| !v.is_finite()) {
        return Err(DsfError::Numerical {
            what: "sym_eigen",
            residual: f64::NAN,
        });
    }
    Ok(EigenDecomposition { q, eigvals })
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[i * n + j] * a[i * n + j];
            }
        }
    }
    acc.sqrt()
}

/// Annihilates `a[p][q]` with a Jacobi rotation and accumulates it into `vt`.
fn rotate(a: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize) {
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let apq = a[p * n + q];

    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[p * n + k];
        let akq = a[q * n + k];
        let np = c * akp - s * akq;
        let nq = s * akp + c * akq;
        a[p * n + k] = np;
        a[q * n + k] = nq;
        a[k * n + p] = np;
        a[k * n + q] = nq;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    let (lo, hi) = vt.split_at_mut(q * n);
    let vp = &mut lo[p * n..(p + 1) * n];
    let vq = &mut hi[..n];
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}
