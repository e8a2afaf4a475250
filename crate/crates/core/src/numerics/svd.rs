use super::eigen::sym_eigen;
use super::matrix::DenseMatrix;
use super::{dot, matmul_nt, matmul_tn};
use crate::error::{DsfError, Result};

/// Truncated SVD `W ≈ U · diag(singulars) · Vt`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub singulars: Vec<f64>,
    pub vt: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let k = self.rank();
        let us = DenseMatrix::from_fn(self.u.rows(), k, |i, j| {
            self.u.get(i, j) * self.singulars[j]
        });
        super::matmul(&us, &self.vt).expect("conformant factors")
    }
}

/// Top-`k` singular triplets via the eigendecomposition of the smaller Gram.
///
/// The singular vectors on the Gram side come straight from the eigenvectors.
/// The other side is recovered by projecting through `W` and then
/// re-orthonormalized, so both factors stay orthonormal even when some
/// singular values are tiny.
pub fn svd(w: &DenseMatrix, k: usize) -> Result<SvdResult> {
    let (n, m) = w.shape();
    if k == 0 || k > n.min(m) {
        return Err(DsfError::pre(format!(
            "svd rank {k} outside [1, {}]",
            n.min(m)
        )));
    }
    // Work on the side with the smaller Gram; `flip` means we factor Wᵀ.
    let flip = n < m;
    let gram = if flip {
        matmul_nt(w, w)?.symmetrized()
    } else {
        matmul_tn(w, w)?.symmetrized()
    };
    let eig = sym_eigen(&gram)?;
    let dim = eig.dim();

    // Descending eigenvalue, ties by ascending eigen-index.
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigvals[b].total_cmp(&eig.eigvals[a]).then(a.cmp(&b)));
    order.truncate(k);

    // Gram-side vectors as rows: `basis[r]` is the r-th eigenvector.
    let basis: Vec<Vec<f64>> = order
        .iter()
        .map(|&c| (0..dim).map(|i| eig.q.get(i, c)).collect())
        .collect();

    // Project the other side: for flip, v = Wᵀu; otherwise u = Wv.
    let other_len = if flip { m } else { n };
    let mut projected: Vec<Vec<f64>> = Vec::with_capacity(k);
    for b in &basis {
        let mut out = vec![0.0; other_len];
        if flip {
            for (i, &bi) in b.iter().enumerate() {
                if bi != 0.0 {
                    super::axpy(&mut out, bi, w.row(i));
                }
            }
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = dot(w.row(i), b);
            }
        }
        projected.push(out);
    }
    let mut singulars: Vec<f64> = projected.iter().map(|p| dot(p, p).sqrt()).collect();
    let scale = singulars.first().copied().unwrap_or(0.0);
    orthonormalize(&mut projected, scale)?;

    // Keep the order descending after replacing √λ by ‖W·v‖.
    let mut perm: Vec<usize> = (0..k).collect();
    perm.sort_by(|&a, &b| singulars[b].total_cmp(&singulars[a]).then(a.cmp(&b)));
    singulars = perm.iter().map(|&i| singulars[i]).collect();

    let gram_side = DenseMatrix::from_fn(k, dim, |r, i| basis[perm[r]][i]);
    let other_side = DenseMatrix::from_fn(k, other_len, |r, i| projected[perm[r]][i]);
    let (u, vt) = if flip {
        (gram_side.transpose(), other_side)
    } else {
        (other_side.transpose(), gram_side)
    };
    if !u.is_finite() || !vt.is_finite() {
        return Err(DsfError::Numerical {
            what: "svd",
            residual: f64::NAN,
        });
    }
    Ok(SvdResult { u, singulars, vt })
}

/// Two passes of modified Gram–Schmidt. Columns that vanish are replaced by
/// the first unit vector orthogonal to the ones before them.
fn orthonormalize(vectors: &mut [Vec<f64>], scale: f64) -> Result<()> {
    let tiny = 1e-13 * scale.max(f64::MIN_POSITIVE);
    for idx in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(idx);
        let v = &mut rest[0];
        let original = dot(v, v).sqrt();
        for _ in 0..2 {
            for prev in done.iter() {
                let c = dot(prev, v);
                super::axpy(v, -c, prev);
            }
        }
        let norm = dot(v, v).sqrt();
        if norm > tiny && norm > 1e-8 * original {
            v.iter_mut().for_each(|x| *x /= norm);
            continue;
        }
        let len = v.len();
        let mut placed = false;
        for e in 0..len {
            v.iter_mut().for_each(|x| *x = 0.0);
            v[e] = 1.0;
            for _ in 0..2 {
                for prev in done.iter() {
                    let c = dot(prev, v);
                    super::axpy(v, -c, prev);
                }
            }
            let nrm = dot(v, v).sqrt();
            if nrm > 0.5 {
                v.iter_mut().for_each(|x| *x /= nrm);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(DsfError::Numerical {
                what: "svd basis completion",
                residual: norm,
            });
        }
    }
    Ok(())
}
