//! Reference implementations that share no code with the library under test.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spmvlab::gen::{Triplet, TripletMatrix};

/// Row-major dense matrix built from triplets, multiplied the obvious way.
pub fn dense_matvec(t: &TripletMatrix, x: &[f64]) -> Vec<f64> {
    let (n, m) = (t.nrows, t.ncols);
    let mut dense = vec![0.0; n * m];
    for e in &t.entries {
        dense[e.row as usize * m + e.col as usize] += e.value;
    }
    (0..n)
        .map(|i| (0..m).map(|j| dense[i * m + j] * x[j]).sum())
        .collect()
}

/// Per-row magnitude bound for relative error: sum of |a_ij * x_j|.
pub fn row_magnitudes(t: &TripletMatrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; t.nrows];
    for e in &t.entries {
        out[e.row as usize] += (e.value * x[e.col as usize]).abs();
    }
    out
}

/// Random sparse matrix with distinct entries, at most `max_n` rows and
/// columns and density at most `max_density`.
pub fn random_sparse(rng: &mut ChaCha8Rng, max_n: usize, max_density: f64) -> TripletMatrix {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_n);
    let density = rng.gen_range(0.0..=max_density);
    let mut t = TripletMatrix::new(n, m);
    for i in 0..n {
        for j in 0..m {
            if rng.gen_bool(density) {
                let value = rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-3..4));
                t.entries.push(Triplet {
                    row: i as u32,
                    col: j as u32,
                    value,
                });
            }
        }
    }
    t
}

/// Fully-associative LRU cache over line numbers. The deque holds resident
/// lines from least to most recently used.
pub struct LruOracle {
    capacity: usize,
    lines: VecDeque<u64>,
    pub hits: u64,
    pub misses: u64,
}

impl LruOracle {
    pub fn new(capacity: usize) -> Self {
        LruOracle {
            capacity,
            lines: VecDeque::with_capacity(capacity + 1),
            hits: 0,
            misses: 0,
        }
    }

    /// Returns true on a hit. Misses install the line, evicting the LRU one.
    pub fn access(&mut self, line: u64) -> bool {
        if let Some(pos) = self.lines.iter().position(|&l| l == line) {
            self.lines.remove(pos);
            self.lines.push_back(line);
            self.hits += 1;
            true
        } else {
            self.misses += 1;
            self.lines.push_back(line);
            if self.lines.len() > self.capacity {
                self.lines.pop_front();
            }
            false
        }
    }
}

/// Chain of fully-associative LRU levels, no prefetching. A miss at one
/// level probes the next; a hit stops the walk. Every level passed on the
/// way is filled.
pub struct ChainOracle {
    pub levels: Vec<LruOracle>,
}

impl ChainOracle {
    pub fn new(capacities: &[usize]) -> Self {
        ChainOracle {
            levels: capacities.iter().map(|&c| LruOracle::new(c)).collect(),
        }
    }

    pub fn access(&mut self, line: u64) {
        for level in &mut self.levels {
            if level.access(line) {
                return;
            }
        }
    }

    pub fn misses(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.misses).collect()
    }
}

/// Mixed random trace: bursts of sequential lines, random lines in a region
/// and short re-use loops.
pub fn random_line_trace(rng: &mut ChaCha8Rng, len: usize) -> Vec<u64> {
    let region = rng.gen_range(8..4096u64);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        match rng.gen_range(0..3) {
            0 => {
                let start = rng.gen_range(0..region);
                let run = rng.gen_range(1..64);
                out.extend((start..start + run).take(len - out.len()));
            }
            1 => out.push(rng.gen_range(0..region)),
            _ => {
                let base = rng.gen_range(0..region);
                for _ in 0..rng.gen_range(1..8) {
                    for k in 0..rng.gen_range(1..6u64) {
                        if out.len() < len {
                            out.push(base + k);
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
