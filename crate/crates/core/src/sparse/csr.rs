use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gen::{Triplet, TripletMatrix};

/// Compressed sparse row storage with 32-bit indices and 64-bit values.
///
/// Invariants (checked by every constructor):
/// - `rowptr.len() == nrows + 1`, `rowptr[0] == 0`, `rowptr[nrows] == nnz`,
///   nondecreasing;
/// - column indices strictly increasing within a row and `< ncols`;
/// - `colidx.len() == values.len() == nnz`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    rowptr: Vec<u32>,
    colidx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        rowptr: Vec<u32>,
        colidx: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if rowptr.len() != nrows + 1 {
            return Err(Error::Shape(format!(
                "rowptr has {} entries for {nrows} rows",
                rowptr.len()
            )));
        }
        if colidx.len() != values.len() {
            return Err(Error::Shape(format!(
                "{} column indices but {} values",
                colidx.len(),
                values.len()
            )));
        }
        if rowptr[0] != 0 || rowptr[nrows] as usize != colidx.len() {
            return Err(Error::Shape("rowptr must span [0, nnz]".into()));
        }
        if ncols as u64 > u64::from(u32::MAX) + 1 {
            return Err(Error::Shape(format!(
                "{ncols} columns exceed 32-bit indexing"
            )));
        }
        for (i, w) in rowptr.windows(2).enumerate() {
            if w[0] > w[1] {
                return Err(Error::Shape(format!("rowptr decreases at row {i}")));
            }
            let row = &colidx[w[0] as usize..w[1] as usize];
            if row.windows(2).any(|c| c[0] >= c[1]) {
                return Err(Error::Shape(format!(
                    "columns of row {i} are not strictly increasing"
                )));
            }
            if let Some(&last) = row.last() {
                if last as usize >= ncols {
                    return Err(Error::Shape(format!(
                        "column {last} in row {i} is out of range for {ncols} columns"
                    )));
                }
            }
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            rowptr,
            colidx,
            values,
        })
    }

    /// Builds CSR from coordinate entries in any order. Duplicate `(row, col)`
    /// pairs are rejected.
    pub fn from_triplets(t: &TripletMatrix) -> Result<Self> {
        if t.entries.len() > u32::MAX as usize {
            return Err(Error::Shape(format!(
                "{} nonzeros exceed 32-bit row pointers",
                t.entries.len()
            )));
        }
        for e in &t.entries {
            if e.row as usize >= t.nrows || e.col as usize >= t.ncols {
                return Err(Error::Shape(format!(
                    "entry ({}, {}) outside a {}x{} matrix",
                    e.row, e.col, t.nrows, t.ncols
                )));
            }
        }

        let mut rowptr = vec![0u32; t.nrows + 1];
        for e in &t.entries {
            rowptr[e.row as usize + 1] += 1;
        }
        for i in 0..t.nrows {
            rowptr[i + 1] += rowptr[i];
        }

        let m = t.entries.len();
        let mut next: Vec<u32> = rowptr[..t.nrows].to_vec();
        let mut colidx = vec![0u32; m];
        let mut values = vec![0.0f64; m];
        for e in &t.entries {
            let slot = &mut next[e.row as usize];
            colidx[*slot as usize] = e.col;
            values[*slot as usize] = e.value;
            *slot += 1;
        }

        // Sort each row by column, carrying values along.
        let mut scratch: Vec<(u32, f64)> = Vec::new();
        for i in 0..t.nrows {
            let (lo, hi) = (rowptr[i] as usize, rowptr[i + 1] as usize);
            if colidx[lo..hi].windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            scratch.clear();
            scratch.extend(
                colidx[lo..hi]
                    .iter()
                    .copied()
                    .zip(values[lo..hi].iter().copied()),
            );
            scratch.sort_unstable_by_key(|&(c, _)| c);
            if let Some(w) = scratch.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Shape(format!("duplicate entry ({i}, {})", w[0].0)));
            }
            for (k, (c, v)) in scratch.iter().enumerate() {
                colidx[lo + k] = *c;
                values[lo + k] = *v;
            }
        }

        Ok(CsrMatrix {
            nrows: t.nrows,
            ncols: t.ncols,
            rowptr,
            colidx,
            values,
        })
    }

    pub fn to_triplets(&self) -> TripletMatrix {
        let mut t = TripletMatrix::new(self.nrows, self.ncols);
        t.entries.reserve(self.nnz());
        for i in 0..self.nrows {
            for k in self.row_range(i) {
                t.entries.push(Triplet {
                    row: i as u32,
                    col: self.colidx[k],
                    value: self.values[k],
                });
            }
        }
        t
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            rowptr: (0..=n as u32).collect(),
            colidx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.colidx.len()
    }

    #[inline]
    pub fn rowptr(&self) -> &[u32] {
        &self.rowptr
    }

    #[inline]
    pub fn colidx(&self) -> &[u32] {
        &self.colidx
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.rowptr[i] as usize..self.rowptr[i + 1] as usize
    }

    /// Total number of stored elements across the three arrays: `2m + n + 1`.
    pub fn element_count(&self) -> usize {
        self.values.len() + self.colidx.len() + self.rowptr.len()
    }

    pub fn row_degrees(&self) -> Vec<u32> {
        self.rowptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.row_range(i) {
                row[self.colidx[k] as usize] = self.values[k];
            }
        }
        d
    }
}
