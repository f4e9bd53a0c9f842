//! Seeded matrix generators.
//!
//! Every generator draws from [`ChaCha8Rng`] (`rand_chacha` 0.3) seeded with
//! `seed_from_u64(seed)`. The R-MAT edges come from stream 0 and the random
//! permutations from stream 1, so turning permutation on or off never changes
//! the underlying edge set. Outputs are bit-identical across platforms for a
//! given [`GenSpec`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SCALE: u32 = 4;
pub const MAX_SCALE: u32 = 26;

/// Graph500 / original R-MAT quadrant probabilities `(a, b, c, d)`.
pub const DEFAULT_RMAT_PROBS: [f64; 4] = [0.57, 0.19, 0.19, 0.05];

const EDGE_STREAM: u64 = 0;
const PERMUTE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Rmat,
    Fd9,
}

impl MatrixKind {
    pub fn default_nnz_per_row(self) -> u32 {
        match self {
            MatrixKind::Rmat => 8,
            MatrixKind::Fd9 => 9,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Rmat => "rmat",
            MatrixKind::Fd9 => "fd9",
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MatrixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rmat" | "r-mat" => Ok(MatrixKind::Rmat),
            "fd9" | "fd" => Ok(MatrixKind::Fd9),
            other => Err(Error::InvalidSpec(format!("unknown matrix kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub kind: MatrixKind,
    /// The matrix has `2^scale` rows.
    pub scale: u32,
    pub nnz_per_row: u32,
    pub rmat_probs: [f64; 4],
    pub seed: u64,
    pub permute: bool,
}

impl GenSpec {
    pub fn rmat(scale: u32, seed: u64) -> Self {
        GenSpec {
            kind: MatrixKind::Rmat,
            scale,
            nnz_per_row: 8,
            rmat_probs: DEFAULT_RMAT_PROBS,
            seed,
            permute: false,
        }
    }

    pub fn fd9(scale: u32) -> Self {
        GenSpec {
            kind: MatrixKind::Fd9,
            scale,
            nnz_per_row: 9,
            rmat_probs: DEFAULT_RMAT_PROBS,
            seed: 0,
            permute: false,
        }
    }

    pub fn with_permute(mut self, permute: bool) -> Self {
        self.permute = permute;
        self
    }

    pub fn nrows(&self) -> u64 {
        1u64 << self.scale
    }

    pub fn nnz(&self) -> u64 {
        self.nrows() * u64::from(self.nnz_per_row)
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_SCALE..=MAX_SCALE).contains(&self.scale) {
            return Err(Error::InvalidSpec(format!(
                "scale {} outside [{MIN_SCALE}, {MAX_SCALE}]",
                self.scale
            )));
        }
        if self.nnz_per_row == 0 {
            return Err(Error::InvalidSpec("nnz_per_row must be positive".into()));
        }
        match self.kind {
            MatrixKind::Fd9 if self.nnz_per_row != 9 => {
                return Err(Error::InvalidSpec(
                    "a 9-point stencil has exactly 9 nonzeros per row".into(),
                ))
            }
            MatrixKind::Rmat => {
                if self.rmat_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::InvalidSpec(format!(
                        "R-MAT probabilities {:?} must each lie in [0, 1]",
                        self.rmat_probs
                    )));
                }
                let sum: f64 = self.rmat_probs.iter().sum();
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidSpec(format!(
                        "R-MAT probabilities sum to {sum}, not 1"
                    )));
                }
            }
            MatrixKind::Fd9 => {}
        }
        if self.nnz() > u64::from(u32::MAX) {
            return Err(Error::InvalidSpec(format!(
                "{} nonzeros exceed the 32-bit index limit",
                self.nnz()
            )));
        }
        Ok(())
    }
}

/// Compact spec string: `kind:scale[:seed][:perm]`, e.g. `rmat:14:7:perm`.
impl FromStr for GenSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let kind: MatrixKind = parts.next().unwrap_or_default().parse()?;
        let scale: u32 = parts
            .next()
            .ok_or_else(|| Error::InvalidSpec(format!("`{s}` is missing a scale")))?
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("bad scale in `{s}`")))?;
        let mut spec = match kind {
            MatrixKind::Rmat => GenSpec::rmat(scale, 0),
            MatrixKind::Fd9 => GenSpec::fd9(scale),
        };
        for part in parts {
            if part == "perm" {
                spec.permute = true;
            } else {
                spec.seed = part
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("bad seed `{part}` in `{s}`")))?;
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.kind, self.scale, self.seed)?;
        if self.permute {
            f.write_str(":perm")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub row: u32,
    pub col: u32,
    pub value: f64,
}

/// Unordered coordinate entries. Generators emit them sorted by `(row, col)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripletMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<Triplet>,
}

impl TripletMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletMatrix {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: u32, col: u32, value: f64) {
        self.entries.push(Triplet { row, col, value });
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn sort(&mut self) {
        self.entries.sort_unstable_by_key(|t| (t.row, t.col));
    }

    pub fn row_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0u32; self.nrows];
        for t in &self.entries {
            deg[t.row as usize] += 1;
        }
        deg
    }
}

/// A bijection on `[0, n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<u32>,
}

impl Permutation {
    pub fn new(map: Vec<u32>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            let slot = seen
                .get_mut(m as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("{m} is out of range")))?;
            if *slot {
                return Err(Error::InvalidArgument(format!("{m} appears twice")));
            }
            *slot = true;
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n as u32).collect(),
        }
    }

    /// Fisher–Yates: for `i` from `n-1` down to 1, swap `i` with a uniform
    /// index in `[0, i]`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            map.swap(i, j);
        }
        Permutation { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: u32) -> u32 {
        self.map[i as usize]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0u32; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m as usize] = i as u32;
        }
        Permutation { map: inv }
    }

    /// `out[P(i)] = v[i]`.
    pub fn permute_vector(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(
            v.len(),
            self.map.len(),
            "vector length must match permutation"
        );
        let mut out = vec![0.0; v.len()];
        for (i, &m) in self.map.iter().enumerate() {
            out[m as usize] = v[i];
        }
        out
    }
}

/// Runs the generator named by `spec.kind`, then applies a random row/column
/// permutation when `spec.permute` is set.
pub fn generate(spec: &GenSpec) -> Result<TripletMatrix> {
    let t = match spec.kind {
        MatrixKind::Rmat => gen_rmat(spec)?,
        MatrixKind::Fd9 => gen_fd9(spec)?,
    };
    if spec.permute {
        let (p, _, _) = permute_random(&t, spec.seed)?;
        Ok(p)
    } else {
        Ok(t)
    }
}

fn draw_rmat_edge(rng: &mut ChaCha8Rng, scale: u32, cumulative: &[f64; 3]) -> u64 {
    let mut row = 0u64;
    let mut col = 0u64;
    for _ in 0..scale {
        let u: f64 = rng.gen();
        let (r, c) = if u < cumulative[0] {
            (0, 0)
        } else if u < cumulative[1] {
            (0, 1)
        } else if u < cumulative[2] {
            (1, 0)
        } else {
            (1, 1)
        };
        row = (row << 1) | r;
        col = (col << 1) | c;
    }
    (row << 32) | col
}

/// Recursive-quadrant R-MAT generator with exactly `nnz_per_row * 2^scale`
/// distinct entries.
///
/// Edges are drawn i.i.d.; the result is the set of the first `m` distinct
/// edges of that stream. Draws are processed in rounds sized to the current
/// deficit, which never overshoots `m`, so the outcome is identical to
/// redrawing each duplicate as it appears.
pub fn gen_rmat(spec: &GenSpec) -> Result<TripletMatrix> {
    if spec.kind != MatrixKind::Rmat {
        return Err(Error::InvalidSpec("gen_rmat needs an R-MAT spec".into()));
    }
    spec.validate()?;
    let n = spec.nrows();
    let m = spec.nnz();
    if m > n * n {
        return Err(Error::InfeasibleDensity { nnz: m, n });
    }

    let [a, b, c, _] = spec.rmat_probs;
    let cumulative = [a, a + b, a + b + c];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(EDGE_STREAM);

    let m = m as usize;
    let mut keys: Vec<u64> = Vec::with_capacity(m);
    while keys.len() < m {
        let deficit = m - keys.len();
        keys.extend((0..deficit).map(|_| draw_rmat_edge(&mut rng, spec.scale, &cumulative)));
        keys.sort_unstable();
        keys.dedup();
    }

    let entries = keys
        .into_iter()
        .map(|k| Triplet {
            row: (k >> 32) as u32,
            col: k as u32,
            value: 1.0,
        })
        .collect();
    Ok(TripletMatrix {
        nrows: n as usize,
        ncols: n as usize,
        entries,
    })
}

/// Grid dimensions `(gx, gy)` of the periodic stencil for a given scale.
pub fn fd9_grid(scale: u32) -> (usize, usize) {
    (1usize << scale.div_ceil(2), 1usize << (scale / 2))
}

/// 9-point stencil on a `gx x gy` torus; every row holds itself and its eight
/// wrapped neighbours.
pub fn gen_fd9(spec: &GenSpec) -> Result<TripletMatrix> {
    if spec.kind != MatrixKind::Fd9 {
        return Err(Error::InvalidSpec("gen_fd9 needs an FD9 spec".into()));
    }
    spec.validate()?;
    let (gx, gy) = fd9_grid(spec.scale);
    let n = gx * gy;
    let mut t = TripletMatrix::new(n, n);
    t.entries.reserve(9 * n);
    let mut cols = [0u32; 9];
    for y in 0..gy {
        for x in 0..gx {
            let row = (y * gx + x) as u32;
            let mut k = 0;
            for dy in [gy - 1, 0, 1] {
                let ny = (y + dy) % gy;
                for dx in [gx - 1, 0, 1] {
                    let nx = (x + dx) % gx;
                    cols[k] = (ny * gx + nx) as u32;
                    k += 1;
                }
            }
            cols.sort_unstable();
            for &col in &cols {
                t.push(row, col, 1.0);
            }
        }
    }
    Ok(t)
}

/// Relabels rows by `P` and columns by `Q`: each `(i, j, v)` becomes
/// `(P(i), Q(j), v)`. Output entries are sorted by `(row, col)`.
pub fn permute_random(
    t: &TripletMatrix,
    seed: u64,
) -> Result<(TripletMatrix, Permutation, Permutation)> {
    if t.nrows != t.ncols {
        return Err(Error::Shape(format!(
            "cannot permute a non-square {}x{} matrix",
            t.nrows, t.ncols
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PERMUTE_STREAM);
    let p = Permutation::random(t.nrows, &mut rng);
    let q = Permutation::random(t.ncols, &mut rng);
    let out = apply_permutation(t, &p, &q);
    Ok((out, p, q))
}

pub fn apply_permutation(t: &TripletMatrix, p: &Permutation, q: &Permutation) -> TripletMatrix {
    let mut out = TripletMatrix {
        nrows: t.nrows,
        ncols: t.ncols,
        entries: t
            .entries
            .iter()
            .map(|e| Triplet {
                row: p.apply(e.row),
                col: q.apply(e.col),
                value: e.value,
            })
            .collect(),
    };
    out.sort();
    out
}
