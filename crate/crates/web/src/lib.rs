//! Browser front end over the simulator.
//!
//! Every export takes plain values and returns a JSON string, so the page
//! needs no glue beyond `JSON.parse` and the functions run unchanged in
//! native tests.

use serde::Serialize;
use spmvlab::gen::{generate, GenSpec, MatrixKind};
use spmvlab::perf;
use spmvlab::sim::{
    simulate_spmv, simulated_counters, ArrayLayout, CacheConfig, InstructionModel, SimResult,
    Stream,
};
use spmvlab::sparse::{problem_bytes, CsrMatrix};
use wasm_bindgen::prelude::*;

/// Largest scale the page will build; bigger matrices stall the tab.
pub const MAX_DEMO_SCALE: u32 = 16;
pub const MAX_THREADS: u32 = 16;
pub const MAX_BINS: u32 = 256;

type Out = Result<String, String>;

fn parse_spec(spec: &str) -> Result<GenSpec, String> {
    let spec: GenSpec = spec.trim().parse().map_err(|e| format!("{e}"))?;
    if spec.scale > MAX_DEMO_SCALE {
        return Err(format!(
            "scale {} is above the demo limit of {MAX_DEMO_SCALE}",
            spec.scale
        ));
    }
    Ok(spec)
}

fn build(spec: &GenSpec) -> Result<CsrMatrix, String> {
    let t = generate(spec).map_err(|e| e.to_string())?;
    CsrMatrix::from_triplets(&t).map_err(|e| e.to_string())
}

fn json<T: Serialize>(v: &T) -> Out {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Pattern {
    spec: String,
    n: usize,
    nnz: usize,
    bins: u32,
    max: u32,
    /// Row-major `bins x bins` nonzero counts.
    counts: Vec<u32>,
}

/// Nonzero counts over a `bins x bins` grid laid on the matrix.
#[wasm_bindgen]
pub fn sparsity_pattern(spec: &str, bins: u32) -> Out {
    let spec = parse_spec(spec)?;
    let a = build(&spec)?;
    let n = a.nrows();
    let bins = bins.clamp(1, MAX_BINS).min(n as u32);
    let cell = |i: usize| (i * bins as usize / n).min(bins as usize - 1);
    let mut counts = vec![0u32; (bins * bins) as usize];
    for i in 0..n {
        let r = cell(i);
        for &c in &a.colidx()[a.row_range(i)] {
            counts[r * bins as usize + cell(c as usize)] += 1;
        }
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    json(&Pattern {
        spec: spec.to_string(),
        n,
        nnz: a.nnz(),
        bins,
        max,
        counts,
    })
}

fn cache(preset: &str, prefetch: bool, l3: bool, threads: u32) -> Result<CacheConfig, String> {
    let mut cfg = CacheConfig::preset(preset).map_err(|e| e.to_string())?;
    if threads == 0 || threads > MAX_THREADS {
        return Err(format!("threads must lie in 1..={MAX_THREADS}"));
    }
    cfg.prefetch.enabled = prefetch;
    cfg.l3_bypass = !l3;
    cfg.cores = threads;
    Ok(cfg)
}

#[derive(Serialize)]
struct Level {
    name: &'static str,
    accesses: u64,
    misses: u64,
    miss_ratio: f64,
}

#[derive(Serialize)]
struct StreamRow {
    name: &'static str,
    l2_accesses: u64,
    l2_misses: u64,
}

#[derive(Serialize)]
struct Rates {
    l2_miss_rate: f64,
    l3_miss_rate: f64,
    prefetch_miss_rate: f64,
    l2_stall_fraction: f64,
}

#[derive(Serialize)]
struct Simulation {
    spec: String,
    nnz: usize,
    problem_bytes: u64,
    threads: u32,
    #[serde(flatten)]
    rates: Rates,
    levels: Vec<Level>,
    streams: Vec<StreamRow>,
    prefetch_fills: u64,
    prefetch_suppressed: u64,
    total_cycles: u64,
}

fn rates(r: &SimResult) -> Result<Rates, String> {
    let c = simulated_counters(r, &InstructionModel::default());
    let e = |e: spmvlab::error::Error| e.to_string();
    Ok(Rates {
        l2_miss_rate: perf::l2_miss_rate(&c).map_err(e)?,
        l3_miss_rate: perf::l3_miss_rate(&c).map_err(e)?,
        prefetch_miss_rate: perf::prefetch_miss_rate(&c).map_err(e)?,
        l2_stall_fraction: perf::l2_stall_fraction(&c).map_err(e)?,
    })
}

fn run(a: &CsrMatrix, cfg: &CacheConfig) -> Result<SimResult, String> {
    simulate_spmv(a, &ArrayLayout::for_matrix(a), cfg, 1).map_err(|e| e.to_string())
}

const STREAM_NAMES: [(Stream, &str); 5] = [
    (Stream::RowPtr, "rowptr"),
    (Stream::ColIdx, "colidx"),
    (Stream::Values, "values"),
    (Stream::X, "x"),
    (Stream::Y, "y"),
];

/// One SpMV pass through the named hierarchy, after one warmup pass.
#[wasm_bindgen]
pub fn simulate(spec: &str, preset: &str, threads: u32, prefetch: bool, l3: bool) -> Out {
    let spec = parse_spec(spec)?;
    let cfg = cache(preset, prefetch, l3, threads)?;
    let a = build(&spec)?;
    let r = run(&a, &cfg)?;
    let level = |name, s: &spmvlab::sim::LevelStats| Level {
        name,
        accesses: s.demand_accesses(),
        misses: s.demand_misses,
        miss_ratio: s.miss_ratio(),
    };
    let sim = Simulation {
        spec: spec.to_string(),
        nnz: a.nnz(),
        problem_bytes: problem_bytes(a.nrows() as u64, a.nnz() as u64),
        threads,
        rates: rates(&r)?,
        levels: vec![level("L1", &r.l1), level("L2", &r.l2), level("L3", &r.l3)],
        streams: STREAM_NAMES
            .iter()
            .map(|&(s, name)| StreamRow {
                name,
                l2_accesses: r.l2_stream_accesses.get(s),
                l2_misses: r.l2_stream_misses.get(s),
            })
            .collect(),
        prefetch_fills: r.l2.prefetch_fills,
        prefetch_suppressed: r.per_core.iter().map(|c| c.prefetch_suppressed).sum(),
        total_cycles: r.total_cycles,
    };
    json(&sim)
}

#[derive(Serialize)]
struct SweepPoint {
    scale: u32,
    nnz: usize,
    problem_bytes: u64,
    #[serde(flatten)]
    rates: Rates,
}

#[derive(Serialize)]
struct Sweep {
    kind: String,
    l2_bytes: u64,
    l3_bytes: u64,
    points: Vec<SweepPoint>,
}

/// Miss rates over a scale range, single core. R-MAT is relabelled randomly
/// so locality comes from structure alone.
#[wasm_bindgen]
pub fn size_sweep(kind: &str, from: u32, to: u32, seed: u32, preset: &str, prefetch: bool) -> Out {
    let kind: MatrixKind = kind
        .parse()
        .map_err(|e: spmvlab::error::Error| e.to_string())?;
    if from > to {
        return Err(format!("empty scale range {from}..={to}"));
    }
    let cfg = cache(preset, prefetch, true, 1)?;
    let mut points = Vec::new();
    for scale in from..=to {
        let spec = parse_spec(&format!(
            "{kind}:{scale}:{seed}{}",
            if kind == MatrixKind::Rmat {
                ":perm"
            } else {
                ""
            }
        ))?;
        let a = build(&spec)?;
        let r = run(&a, &cfg)?;
        points.push(SweepPoint {
            scale,
            nnz: a.nnz(),
            problem_bytes: problem_bytes(a.nrows() as u64, a.nnz() as u64),
            rates: rates(&r)?,
        });
    }
    json(&Sweep {
        kind: kind.to_string(),
        l2_bytes: cfg.l2.capacity_bytes,
        l3_bytes: cfg.l3.capacity_bytes,
        points,
    })
}
