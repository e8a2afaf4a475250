use serde::{Deserialize, Serialize};

use crate::admm::SparsityMask;
use crate::error::{DsfError, Result};
use crate::numerics::DenseMatrix;

/// Compressed-row sparse matrix with an explicit nonzero budget.
///
/// Stored entries may be exact zeros; they still count toward `nnz`, so a
/// factor keeps the shape of the mask that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFactor {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    budget: usize,
}

impl SparseFactor {
    /// Validating constructor.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
        budget: usize,
    ) -> Result<Self> {
        let f = SparseFactor {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            budget,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(DsfError::Format(msg));
        if self.row_ptr.len() != self.rows + 1 {
            return bad(format!(
                "row_ptr has {} entries, expected {}",
                self.row_ptr.len(),
                self.rows + 1
            ));
        }
        if self.row_ptr[0] != 0 {
            return bad("row_ptr[0] must be 0".into());
        }
        if self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("row_ptr decreases".into());
        }
        let nnz = self.row_ptr[self.rows];
        if nnz != self.col_idx.len() || nnz != self.values.len() {
            return bad(format!(
                "row_ptr[rows] = {nnz} but {} column indices and {} values",
                self.col_idx.len(),
                self.values.len()
            ));
        }
        for r in 0..self.rows {
            let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("column indices not strictly increasing in row {r}"));
            }
            if cols.last().is_some_and(|&c| c >= self.cols) {
                return bad(format!("column index out of range in row {r}"));
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value".into());
        }
        if nnz > self.budget {
            return Err(DsfError::pre(format!(
                "{nnz} stored entries exceed budget {}",
                self.budget
            )));
        }
        Ok(())
    }

    /// Stores every position of `mask`, taking values from `m`.
    pub fn from_masked(m: &DenseMatrix, mask: &SparsityMask, budget: usize) -> Result<Self> {
        if m.shape() != mask.shape() {
            return Err(DsfError::shape(format!(
                "values {:?} with mask {:?}",
                m.shape(),
                mask.shape()
            )));
        }
        let (rows, cols) = m.shape();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(mask.nnz());
        let mut values = Vec::with_capacity(mask.nnz());
        row_ptr.push(0);
        for i in 0..rows {
            for j in 0..cols {
                if mask.get(i, j) {
                    col_idx.push(j);
                    values.push(m.get(i, j));
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts(rows, cols, row_ptr, col_idx, values, budget)
    }

    /// Stores the nonzero entries of `m`.
    pub fn from_dense(m: &DenseMatrix, budget: usize) -> Result<Self> {
        Self::from_masked(m, &SparsityMask::support_of(m), budget)
    }

    /// Stores every entry of `m`, zeros included.
    pub fn dense_stored(m: &DenseMatrix) -> Self {
        let (rows, cols) = m.shape();
        Self::from_masked(m, &SparsityMask::full(rows, cols), rows * cols)
            .expect("full storage is always valid")
    }

    pub fn identity(n: usize, budget: usize) -> Result<Self> {
        Self::from_parts(
            n,
            n,
            (0..=n).collect(),
            (0..n).collect(),
            vec![1.0; n],
            budget,
        )
    }

    pub fn zeros(rows: usize, cols: usize, budget: usize) -> Self {
        SparseFactor {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
            budget,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn density(&self) -> f64 {
        let total = self.rows * self.cols;
        if total == 0 {
            0.0
        } else {
            self.nnz() as f64 / total as f64
        }
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(col, value)` pairs of row `i`.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                m.set(i, j, v);
            }
        }
        m
    }

    /// Stored positions as a mask.
    pub fn pattern(&self) -> SparsityMask {
        let mut bits = vec![false; self.rows * self.cols];
        for i in 0..self.rows {
            for (j, _) in self.row_entries(i) {
                bits[i * self.cols + j] = true;
            }
        }
        SparsityMask::from_bits(self.rows, self.cols, bits).expect("consistent shape")
    }

    pub fn transpose(&self) -> SparseFactor {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for (j, v) in self.row_entries(i) {
                let slot = next[j];
                col_idx[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        SparseFactor {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
            budget: self.budget,
        }
    }

    /// Applies `f(row, col, value)` to every stored value.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> SparseFactor {
        let mut out = self.clone();
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.values[k] = f(i, self.col_idx[k], self.values[k]);
            }
        }
        out
    }

    /// Sparse–dense product `self · rhs`.
    pub fn mul_dense(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows() {
            return Err(DsfError::shape(format!(
                "sparse {:?} x dense {:?}",
                self.shape(),
                rhs.shape()
            )));
        }
        let m = rhs.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        for i in 0..self.rows {
            let row = out.row_mut(i);
            for (k, v) in self.row_entries(i) {
                if v != 0.0 {
                    crate::numerics::axpy(row, v, rhs.row(k));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_transpose() {
        let m = DenseMatrix::from_rows(&[[0.0, 2.0, 0.0], [1.0, 0.0, 3.0]]);
        let s = SparseFactor::from_dense(&m, 3).unwrap();
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.row_ptr(), &[0, 1, 3]);
        assert_eq!(s.to_dense(), m);
        let t = s.transpose();
        t.validate().unwrap();
        assert_eq!(t.to_dense(), m.transpose());
        assert_eq!(s.mul_dense(&DenseMatrix::identity(3)).unwrap(), m);
    }

    #[test]
    fn explicit_zeros_are_kept() {
        let m = DenseMatrix::zeros(2, 2);
        let s = SparseFactor::from_masked(&m, &SparsityMask::full(2, 2), 4).unwrap();
        assert_eq!(s.nnz(), 4);
        assert_eq!(s.pattern(), SparsityMask::full(2, 2));
    }

    #[test]
    fn validation_failures() {
        assert!(SparseFactor::from_parts(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0], 2).is_err());
        assert!(SparseFactor::from_parts(1, 2, vec![0, 1], vec![2], vec![1.0], 2).is_err());
        assert!(SparseFactor::from_parts(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 1.0], 1).is_err());
        assert!(SparseFactor::from_parts(2, 2, vec![0, 1], vec![0], vec![1.0], 1).is_err());
        assert!(SparseFactor::identity(3, 2).is_err());
    }
}
