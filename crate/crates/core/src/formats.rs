//! Binary containers for dense matrices (`DSFM`) and sparse factors (`DSFS`).
//!
//! All integers and floats are little-endian. Dense payloads are row-major.
//!
//! ```text
//! DSFM: "DSFM" u32 version=1 u32 dtype=1 u64 rows u64 cols f64[rows·cols]
//! DSFS: "DSFS" u32 version=1 u64 rows u64 cols u64 nnz
//!       u64[rows+1] row_ptr  u64[nnz] col_idx  f64[nnz] values
//! ```

use std::fs;
use std::path::Path;

use crate::error::{DsfError, Result};
use crate::numerics::DenseMatrix;
use crate::sparse::SparseFactor;

pub const DENSE_MAGIC: [u8; 4] = *b"DSFM";
pub const SPARSE_MAGIC: [u8; 4] = *b"DSFS";
pub const VERSION: u32 = 1;
pub const DTYPE_F64: u32 = 1;

pub fn encode_dense(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * m.len());
    out.extend_from_slice(&DENSE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&DTYPE_F64.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn encode_sparse(f: &SparseFactor) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * (f.rows() + 1 + 2 * f.nnz()));
    out.extend_from_slice(&SPARSE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for x in [f.rows(), f.cols(), f.nnz()] {
        out.extend_from_slice(&(x as u64).to_le_bytes());
    }
    for &p in f.row_ptr() {
        out.extend_from_slice(&(p as u64).to_le_bytes());
    }
    for &c in f.col_idx() {
        out.extend_from_slice(&(c as u64).to_le_bytes());
    }
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(DsfError::Format(format!("header truncated at {field}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Checks that exactly `words` 8-byte words remain.
    fn expect_payload(&self, words: Option<usize>) -> Result<()> {
        let need = words.and_then(|w| w.checked_mul(8));
        match need {
            Some(n) if self.remaining() == n => Ok(()),
            Some(n) if self.remaining() > n => Err(DsfError::Format(format!(
                "{} trailing bytes after payload",
                self.remaining() - n
            ))),
            _ => Err(DsfError::Format("payload shorter than header".into())),
        }
    }

    fn words(&mut self, n: usize) -> impl Iterator<Item = [u8; 8]> + 'a {
        let s = &self.buf[self.pos..self.pos + 8 * n];
        self.pos += 8 * n;
        s.chunks_exact(8).map(|c| c.try_into().unwrap())
    }
}

fn check_magic(r: &mut Reader<'_>, magic: [u8; 4]) -> Result<()> {
    let got = r.take(4, "magic")?;
    if got != magic {
        return Err(DsfError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(got),
            String::from_utf8_lossy(&magic)
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(DsfError::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

fn to_usize(v: u64, field: &str) -> Result<usize> {
    usize::try_from(v).map_err(|_| DsfError::Format(format!("{field} {v} too large")))
}

pub fn decode_dense(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut r = Reader::new(bytes);
    check_magic(&mut r, DENSE_MAGIC)?;
    let dtype = r.u32("dtype")?;
    if dtype != DTYPE_F64 {
        return Err(DsfError::Format(format!("unsupported dtype {dtype}")));
    }
    let rows = to_usize(r.u64("rows")?, "rows")?;
    let cols = to_usize(r.u64("cols")?, "cols")?;
    let len = rows.checked_mul(cols);
    r.expect_payload(len)?;
    let data: Vec<f64> = r.words(len.unwrap()).map(f64::from_le_bytes).collect();
    DenseMatrix::from_vec(rows, cols, data)
        .map_err(|_| DsfError::Format("payload holds a non-finite value".into()))
}

/// Decodes a sparse factor; its budget is set to the stored count.
pub fn decode_sparse(bytes: &[u8]) -> Result<SparseFactor> {
    let mut r = Reader::new(bytes);
    check_magic(&mut r, SPARSE_MAGIC)?;
    let rows = to_usize(r.u64("rows")?, "rows")?;
    let cols = to_usize(r.u64("cols")?, "cols")?;
    let nnz = to_usize(r.u64("nnz")?, "nnz")?;
    let words = rows
        .checked_add(1)
        .and_then(|p| nnz.checked_mul(2).and_then(|v| v.checked_add(p)));
    r.expect_payload(words)?;
    let mut index = |n: usize, field: &str| -> Result<Vec<usize>> {
        r.words(n)
            .map(|w| to_usize(u64::from_le_bytes(w), field))
            .collect()
    };
    let row_ptr = index(rows + 1, "row_ptr")?;
    let col_idx = index(nnz, "col_idx")?;
    let values: Vec<f64> = r.words(nnz).map(f64::from_le_bytes).collect();
    SparseFactor::from_parts(rows, cols, row_ptr, col_idx, values, nnz)
}

/// A decoded file of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Container {
    Dense(DenseMatrix),
    Sparse(SparseFactor),
}

pub fn decode_any(bytes: &[u8]) -> Result<Container> {
    match bytes.get(..4) {
        Some(m) if m == DENSE_MAGIC => decode_dense(bytes).map(Container::Dense),
        Some(m) if m == SPARSE_MAGIC => decode_sparse(bytes).map(Container::Sparse),
        Some(m) => Err(DsfError::Format(format!(
            "bad magic {:?}, expected \"DSFM\" or \"DSFS\"",
            String::from_utf8_lossy(m)
        ))),
        None => Err(DsfError::Format("header truncated at magic".into())),
    }
}

pub fn read_dense(path: &Path) -> Result<DenseMatrix> {
    decode_dense(&fs::read(path)?)
}

pub fn read_sparse(path: &Path) -> Result<SparseFactor> {
    decode_sparse(&fs::read(path)?)
}

pub fn read_any(path: &Path) -> Result<Container> {
    decode_any(&fs::read(path)?)
}
