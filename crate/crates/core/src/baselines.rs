//! Reference compressors: magnitude pruning, truncated SVD and Monarch.

use crate::admm::{topk_mask, SparsityMask};
use crate::dsf::FactorPair;
use crate::error::{DsfError, Result};
use crate::numerics::{svd, DenseMatrix};
use crate::sparse::SparseFactor;

/// Keeps the `z` entries of largest magnitude (ties to the lower row-major
/// index). This is the exact Frobenius projection onto `z`-sparse matrices.
pub fn magnitude_prune(w: &DenseMatrix, z: usize) -> Result<SparseFactor> {
    let (n, m) = w.shape();
    if z > n * m {
        return Err(DsfError::pre(format!(
            "budget {z} exceeds {} entries",
            n * m
        )));
    }
    let scores = DenseMatrix::from_fn(n, m, |i, j| w.get(i, j).abs());
    let mask = topk_mask(&scores, z)?;
    SparseFactor::from_masked(w, &mask, z)
}

/// Largest rank whose two factors fit in `z` stored values: `⌊z/(n+m)⌋`,
/// capped at `min(n, m)`.
pub fn rank_for_budget(n: usize, m: usize, z: usize) -> usize {
    if n + m == 0 {
        return 0;
    }
    (z / (n + m)).min(n.min(m))
}

/// Rank-`k` truncated SVD as a factor pair `(U·diag(s), Vᵀ)`, both stored dense.
pub fn low_rank_project(w: &DenseMatrix, k: usize) -> Result<FactorPair> {
    let (n, m) = w.shape();
    if k > n.min(m) {
        return Err(DsfError::pre(format!("rank {k} exceeds min({n}, {m})")));
    }
    if k == 0 {
        return FactorPair::new(
            SparseFactor::zeros(n, 0, 0),
            SparseFactor::zeros(0, m, 0),
            false,
        );
    }
    let r = svd(w, k)?;
    let us = DenseMatrix::from_fn(n, k, |i, j| r.u.get(i, j) * r.singulars[j]);
    FactorPair::new(
        SparseFactor::dense_stored(&us),
        SparseFactor::dense_stored(&r.vt),
        false,
    )
}

/// Block count for an `n×n` Monarch factorization at `target_density`.
///
/// Starts from `round(√n)` and picks the nearest divisor of `n` whose density
/// `(b + n/b)/n` stays within the target (ties to the smaller block count).
pub fn monarch_block_count(n: usize, target_density: f64) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let centre = (n as f64).sqrt().round() as i64;
    (1..=n)
        .filter(|b| n % b == 0)
        .filter(|&b| monarch_density(n, b) <= target_density + 1e-12)
        .min_by_key(|&b| ((b as i64 - centre).abs(), b))
}

/// Stored fraction of an `n×n` Monarch pair with block count `b`.
pub fn monarch_density(n: usize, b: usize) -> f64 {
    let p = n / b;
    (n * b + n * p) as f64 / (n * n) as f64
}

/// Monarch projection via rank-1 approximations of interleaved slices.
///
/// With `p = n/b`, slice `(k, j)` for `k < p`, `j < b` is the `b×p` block
/// `E[i,l] = W[k·b+i, j·p+l]`. Its best rank-1 approximation `σuvᵀ` fills
/// column `j` of diagonal block `k` in the left factor with `√σ·u` and row
/// `k·b+j` of the right factor (columns `j·p..j·p+p`) with `√σ·vᵀ`. The left
/// factor is block diagonal; the right factor is block diagonal up to the
/// row permutation folded into its layout.
pub fn monarch_project(w: &DenseMatrix, b: usize) -> Result<FactorPair> {
    let (n, m) = w.shape();
    if n != m {
        return Err(DsfError::pre(format!(
            "monarch needs a square matrix, got {n}x{m}"
        )));
    }
    if b == 0 || n % b != 0 {
        return Err(DsfError::pre(format!(
            "block count {b} does not divide {n}"
        )));
    }
    let p = n / b;
    let mut left = DenseMatrix::zeros(n, n);
    let mut right = DenseMatrix::zeros(n, n);
    let mut left_bits = vec![false; n * n];
    let mut right_bits = vec![false; n * n];

    for k in 0..p {
        for j in 0..b {
            let slice = w.block(k * b, j * p, b, p)?;
            let r = svd(&slice, 1)?;
            let root = r.singulars[0].sqrt();
            let mid = k * b + j;
            for i in 0..b {
                left.set(k * b + i, mid, root * r.u.get(i, 0));
                left_bits[(k * b + i) * n + mid] = true;
            }
            for l in 0..p {
                right.set(mid, j * p + l, root * r.vt.get(0, l));
                right_bits[mid * n + j * p + l] = true;
            }
        }
    }
    let left_mask = SparsityMask::from_bits(n, n, left_bits)?;
    let right_mask = SparsityMask::from_bits(n, n, right_bits)?;
    FactorPair::new(
        SparseFactor::from_masked(&left, &left_mask, n * b)?,
        SparseFactor::from_masked(&right, &right_mask, n * p)?,
        false,
    )
}
