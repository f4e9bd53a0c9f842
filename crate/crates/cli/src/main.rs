//! `spmvlab` command-line entry point.
//!
//! Flags are checked before any work starts. Bad flags exit with 2, failures
//! while working (I/O, unreadable inputs, unavailable counters) exit with 1.

mod args;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use spmvlab::bench::{self, BenchPlan, BenchRecord, MatrixSource};
use spmvlab::error::Error;
use spmvlab::gen::{generate, GenSpec, MatrixKind};
use spmvlab::perf::{self, EventMap, ProviderKind, RawCounters};
use spmvlab::sim::{
    simulate_spmv, simulated_counters, ArrayLayout, CacheConfig, InstructionModel, SimResult,
};
use spmvlab::sparse::{io::write_atomic, save_matrix, CsrMatrix};

use args::{CacheFlags, Cli, Command, RunFlags, SourceFlags};

enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("spmvlab: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("spmvlab: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_gen(a: args::GenArgs) -> CmdResult {
    let spec = a.matrix.spec();
    spec.validate().map_err(usage)?;
    let m = CsrMatrix::from_triplets(&generate(&spec)?)?;
    if let Some(path) = &a.output {
        save_matrix(&m, path)?;
    }
    let (n, cols) = (m.nrows() as u64, m.ncols() as u64);
    println!("spec: {spec}");
    println!("n: {n}");
    println!("m: {}", m.nnz());
    println!("nnz: {}", m.nnz());
    println!(
        "element_count: {}",
        spmvlab::sparse::element_count(n, m.nnz() as u64)
    );
    println!(
        "problem_bytes: {}",
        spmvlab::sparse::problem_bytes(n, m.nnz() as u64)
    );
    if cols != n {
        println!("ncols: {cols}");
    }
    Ok(())
}

/// Resolves `--matrix`/`--gen` into a source. Only the spec string is
/// checked here; files are read when the work starts.
fn source(flags: &SourceFlags) -> CmdResult<MatrixSource> {
    match (&flags.matrix, &flags.gen) {
        (Some(p), _) => Ok(MatrixSource::File(p.clone())),
        (None, Some(s)) => Ok(MatrixSource::Generated(s.parse().map_err(usage)?)),
        (None, None) => Err(usage("one of --matrix or --gen is required")),
    }
}

fn cache_config(flags: &CacheFlags, no_prefetch: bool, no_l3: bool) -> CmdResult<CacheConfig> {
    let mut cfg = match &flags.config {
        Some(path) => CacheConfig::load(path)?,
        None => CacheConfig::preset(&flags.preset).map_err(usage)?,
    };
    if no_prefetch {
        cfg.prefetch.enabled = false;
    }
    cfg.l3_bypass |= no_l3;
    Ok(cfg)
}

#[derive(Serialize)]
struct SimulateReport {
    matrix: String,
    nrows: usize,
    ncols: usize,
    nnz: usize,
    threads: u32,
    config_hash: String,
    counters: RawCounters,
    l2_miss_rate: f64,
    l3_miss_rate: f64,
    prefetch_miss_rate: f64,
    l2_stall_fraction: f64,
    result: SimResult,
}

fn cmd_simulate(a: args::SimulateArgs) -> CmdResult {
    if a.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let src = source(&a.source)?;
    let mut cfg = cache_config(&a.cache, a.no_prefetch, a.no_l3)?;
    cfg.cores = a.threads;
    cfg.validate()?;

    let m = src.load()?;
    let r = simulate_spmv(&m, &ArrayLayout::for_matrix(&m), &cfg, a.warmup)?;
    let c = simulated_counters(&r, &InstructionModel::default());
    let report = SimulateReport {
        matrix: match &src {
            MatrixSource::Generated(s) => s.to_string(),
            MatrixSource::File(p) => p.display().to_string(),
        },
        nrows: m.nrows(),
        ncols: m.ncols(),
        nnz: m.nnz(),
        threads: a.threads,
        config_hash: CacheConfig {
            cores: 1,
            ..cfg.clone()
        }
        .config_hash(),
        counters: c,
        l2_miss_rate: perf::l2_miss_rate(&c)?,
        l3_miss_rate: perf::l3_miss_rate(&c)?,
        prefetch_miss_rate: perf::prefetch_miss_rate(&c)?,
        l2_stall_fraction: perf::l2_stall_fraction(&c)?,
        result: r,
    };
    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    json.push(b'\n');
    emit(&json, a.output.as_deref())
}

fn emit(bytes: &[u8], path: Option<&Path>) -> CmdResult {
    match path {
        Some(p) => Ok(write_atomic(p, |w| Ok(w.write_all(bytes)?))?),
        None => {
            std::io::stdout().write_all(bytes).map_err(Error::from)?;
            Ok(())
        }
    }
}

fn plan(src: MatrixSource, run: &RunFlags) -> CmdResult<BenchPlan> {
    let mut p = BenchPlan::new(src);
    p.threads = run.threads.clone();
    p.runs = run.runs;
    p.warmup = run.warmup;
    p.provider = run.provider;
    p.cache = cache_config(&run.cache, run.no_prefetch, run.no_l3)?;
    if let Some(path) = &run.events {
        p.events = EventMap::load(path)?;
    }
    p.output = run.output.clone();
    if p.provider == ProviderKind::Hardware && !p.provider.compiled_in() {
        return Err(Failure::Run(Error::Capability(
            "this binary was built without the `hardware` feature".into(),
        )));
    }
    p.validate().map_err(usage)?;
    Ok(p)
}

/// Prints records as CSV when they were not written to a file.
fn print_records(records: &[BenchRecord], written: bool) -> CmdResult {
    if written {
        eprintln!("{} records written", records.len());
        return Ok(());
    }
    let bytes = perf::table::to_bytes(records, perf::table::TableFormat::Csv)?;
    emit(&bytes, None)
}

fn cmd_bench(a: args::BenchArgs) -> CmdResult {
    let p = plan(source(&a.source)?, &a.run)?;
    let records = bench::run_bench(&p)?;
    print_records(&records, p.output.is_some())
}

fn cmd_sweep(a: args::SweepArgs) -> CmdResult {
    let permute = a.kind == MatrixKind::Rmat && !a.no_permute;
    let base = args::spec_for(a.kind, *a.scales.start(), a.seed, permute, a.nnz_per_row);
    for scale in a.scales.clone() {
        GenSpec {
            scale,
            ..base.clone()
        }
        .validate()
        .map_err(usage)?;
    }
    let p = plan(MatrixSource::Generated(base.clone()), &a.run)?;
    let records = bench::sweep(&base, a.scales, &p)?;
    print_records(&records, p.output.is_some())
}

fn cmd_report(a: args::ReportArgs) -> CmdResult {
    if a.stem.is_empty() || a.stem.contains(['/', '\\']) {
        return Err(usage(format!(
            "--stem `{}` must be a plain file-name prefix",
            a.stem
        )));
    }
    let records = bench::merge_records(&a.inputs, a.force)?;
    if let Some(path) = &a.merged {
        bench::write_records(&records, path)?;
    }
    for path in bench::write_plot_data(&records, &a.out_dir, &a.stem)? {
        println!("{}", path.display());
    }
    Ok(())
}
