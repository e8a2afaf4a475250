use super::matrix::DenseMatrix;
use crate::error::{DsfError, Result};

/// Cholesky factor of `S + ρI`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    /// Lower triangle, row-major, full `n×n` storage.
    l: Vec<f64>,
}

impl SpdFactor {
    pub fn new(s: &DenseMatrix, rho: f64) -> Result<Self> {
        if !s.is_square() {
            return Err(DsfError::shape(format!("solve_spd of {:?}", s.shape())));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(DsfError::pre(format!("ridge must be positive, got {rho}")));
        }
        let n = s.rows();
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut acc = s.get(i, j);
                if i == j {
                    acc += rho;
                }
                let (li, lj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                acc -= super::dot(li, lj);
                if i == j {
                    if !(acc > 0.0) || !acc.is_finite() {
                        return Err(DsfError::Numerical {
                            what: "cholesky",
                            residual: acc,
                        });
                    }
                    l[i * n + i] = acc.sqrt();
                } else {
                    l[i * n + j] = acc / l[j * n + j];
                }
            }
        }
        Ok(SpdFactor { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `(S + ρI) · Y = rhs` column-block-wise.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n;
        if rhs.rows() != n {
            return Err(DsfError::shape(format!(
                "rhs {:?} against {n}x{n} system",
                rhs.shape()
            )));
        }
        let m = rhs.cols();
        let mut y = rhs.clone().into_vec();
        // Forward: L·Y' = rhs, one row of Y' at a time.
        for i in 0..n {
            let (done, rest) = y.split_at_mut(i * m);
            let yi = &mut rest[..m];
            for k in 0..i {
                let lik = self.l[i * n + k];
                if lik != 0.0 {
                    super::axpy(yi, -lik, &done[k * m..(k + 1) * m]);
                }
            }
            let inv = 1.0 / self.l[i * n + i];
            yi.iter_mut().for_each(|v| *v *= inv);
        }
        // Backward: Lᵀ·Y = Y'.
        for i in (0..n).rev() {
            let (head, tail) = y.split_at_mut((i + 1) * m);
            let yi = &mut head[i * m..];
            for k in (i + 1)..n {
                let lki = self.l[k * n + i];
                if lki != 0.0 {
                    let off = (k - i - 1) * m;
                    super::axpy(yi, -lki, &tail[off..off + m]);
                }
            }
            let inv = 1.0 / self.l[i * n + i];
            yi.iter_mut().for_each(|v| *v *= inv);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DsfError::Numerical {
                what: "cholesky solve",
                residual: f64::INFINITY,
            });
        }
        Ok(DenseMatrix::from_raw(n, m, y))
    }
}

/// Solves `(S + ρI) · Y = rhs` for symmetric positive semi-definite `S`.
pub fn solve_spd(s: &DenseMatrix, rho: f64, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    SpdFactor::new(s, rho)?.solve(rhs)
}
