//! Storage arithmetic for CSR problems: element counts, byte footprints and
//! the largest matrix that fits a cache of a given size.

/// Byte widths of the stored arrays.
///
/// A problem consists of the three CSR arrays plus the input vector and the
/// output vector, giving `12m + 20n + 4` bytes for `n` rows and `m` nonzeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FootprintModel {
    pub value_bytes: u64,
    pub index_bytes: u64,
}

impl Default for FootprintModel {
    fn default() -> Self {
        FootprintModel {
            value_bytes: 8,
            index_bytes: 4,
        }
    }
}

impl FootprintModel {
    pub fn problem_bytes(&self, n: u64, m: u64) -> u64 {
        // colidx + values, rowptr (n + 1 entries), x and y
        m * (self.index_bytes + self.value_bytes)
            + (n + 1) * self.index_bytes
            + 2 * n * self.value_bytes
    }

    /// Largest `m` with `problem_bytes(m / r, m) <= cache_bytes`, i.e.
    /// `floor((S - 4) * r / (12r + 20))` under the default widths.
    pub fn max_nnz_fitting(&self, cache_bytes: u64, nnz_per_row: u64) -> u64 {
        assert!(nnz_per_row > 0, "nnz_per_row must be positive");
        let fixed = self.index_bytes;
        if cache_bytes <= fixed {
            return 0;
        }
        let per_row = nnz_per_row * (self.index_bytes + self.value_bytes)
            + self.index_bytes
            + 2 * self.value_bytes;
        let num = u128::from(cache_bytes - fixed) * u128::from(nnz_per_row);
        (num / u128::from(per_row)) as u64
    }
}

/// `2m + n + 1`.
pub fn element_count(n: u64, m: u64) -> u64 {
    2 * m + n + 1
}

pub fn problem_bytes(n: u64, m: u64) -> u64 {
    FootprintModel::default().problem_bytes(n, m)
}

pub fn max_nnz_fitting(cache_bytes: u64, nnz_per_row: u64) -> u64 {
    FootprintModel::default().max_nnz_fitting(cache_bytes, nnz_per_row)
}
