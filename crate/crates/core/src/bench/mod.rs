//! Constant-work SpMV benchmarking.
//!
//! Each thread count gets untimed warmup passes, then `num_runs(nnz)` timed
//! passes, then one separate counter pass (hardware counters or a cache
//! simulation). Timing never runs under counters.

mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{
    load_records, merge_records, plot_tables, sweep, write_plot_data, write_records, PlotTable,
    PLOT_METRICS,
};

use crate::error::{Error, Result};
use crate::gen::{generate, GenSpec};
use crate::perf::{collect_hardware, EventMap, Metrics, MetricsRecord, ProviderKind, RawCounters};
use crate::sim::{simulate_spmv, simulated_counters, ArrayLayout, CacheConfig, InstructionModel};
use crate::sparse::{load_matrix, spmv_parallel_into, CsrMatrix, SpmvPool};

/// Floating-point work budget per benchmark point, in multiply-add pairs.
pub const WORK_PER_POINT: u64 = 1 << 33;

pub const DEFAULT_THREADS: [u32; 5] = [1, 2, 4, 8, 16];

/// Timed passes for a matrix with `nnz` nonzeros: `max(1, 2^33 / nnz)`.
pub fn num_runs(nnz: u64) -> u64 {
    (WORK_PER_POINT / nnz.max(1)).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixSource {
    Generated(GenSpec),
    File(PathBuf),
}

impl MatrixSource {
    pub fn load(&self) -> Result<CsrMatrix> {
        match self {
            MatrixSource::Generated(spec) => CsrMatrix::from_triplets(&generate(spec)?),
            MatrixSource::File(p) => load_matrix(p),
        }
    }

    pub fn kind_label(&self) -> String {
        match self {
            MatrixSource::Generated(spec) => spec.kind.to_string(),
            MatrixSource::File(_) => "file".to_string(),
        }
    }

    pub fn scale(&self) -> Option<u32> {
        match self {
            MatrixSource::Generated(spec) => Some(spec.scale),
            MatrixSource::File(_) => None,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            MatrixSource::Generated(spec)
                if spec.kind == crate::gen::MatrixKind::Rmat || spec.permute =>
            {
                Some(spec.seed)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub source: MatrixSource,
    pub threads: Vec<u32>,
    /// Replaces the constant-work rule when set.
    pub runs: Option<u64>,
    pub warmup: u32,
    pub provider: ProviderKind,
    /// Records are written here (CSV, or JSON by extension) when set.
    pub output: Option<PathBuf>,
    pub cache: CacheConfig,
    /// Simulated passes discarded before the counted one.
    pub sim_warmup: u32,
    pub events: EventMap,
    pub instructions: InstructionModel,
}

impl BenchPlan {
    pub fn new(source: MatrixSource) -> Self {
        BenchPlan {
            source,
            threads: DEFAULT_THREADS.to_vec(),
            runs: None,
            warmup: 3,
            provider: ProviderKind::Simulated,
            output: None,
            cache: CacheConfig::desk(),
            sim_warmup: 1,
            events: EventMap::default(),
            instructions: InstructionModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads.is_empty() {
            return Err(Error::InvalidArgument("thread list is empty".into()));
        }
        if self.threads.contains(&0) {
            return Err(Error::InvalidArgument(
                "thread counts must be at least 1".into(),
            ));
        }
        if self.runs == Some(0) {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if !self.provider.compiled_in() {
            return Err(Error::Capability(format!(
                "provider `{}` is not available in this build",
                self.provider
            )));
        }
        if let MatrixSource::Generated(spec) = &self.source {
            spec.validate()?;
        }
        self.cache.validate()
    }

    /// Identifies the counter source: the cache model, or the event map.
    pub fn config_hash(&self) -> String {
        match self.provider {
            ProviderKind::Simulated => CacheConfig {
                cores: 1,
                ..self.cache.clone()
            }
            .config_hash(),
            ProviderKind::Hardware => {
                let text = toml::to_string(&self.events).unwrap_or_default();
                let digest = Sha256::digest(text.as_bytes());
                digest[..8].iter().map(|b| format!("{b:02x}")).collect()
            }
        }
    }
}

/// One benchmark point. The leading columns are the metrics record layout;
/// `runtime_seconds` is the mean per-run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub kind: String,
    pub scale: Option<u32>,
    pub nnz: u64,
    pub threads: u32,
    pub l2_demand_misses: u64,
    pub l3_demand_misses: u64,
    pub prefetch_l2_misses: u64,
    pub l2_stall_cycles: u64,
    pub instructions: u64,
    pub total_cycles: u64,
    pub l2_miss_rate: f64,
    pub l3_miss_rate: f64,
    pub prefetch_miss_rate: f64,
    pub l2_stall_fraction: f64,
    pub gflops: f64,
    pub runtime_seconds: f64,
    pub runs: u64,
    pub mean_time_s: f64,
    pub std_time_s: f64,
    pub provider: ProviderKind,
    pub seed: Option<u64>,
    pub config_hash: String,
}

/// Column names of a bench report, in order.
pub const BENCH_COLUMNS: [&str; 22] = [
    "kind",
    "scale",
    "nnz",
    "threads",
    "l2_demand_misses",
    "l3_demand_misses",
    "prefetch_l2_misses",
    "l2_stall_cycles",
    "instructions",
    "total_cycles",
    "l2_miss_rate",
    "l3_miss_rate",
    "prefetch_miss_rate",
    "l2_stall_fraction",
    "gflops",
    "runtime_seconds",
    "runs",
    "mean_time_s",
    "std_time_s",
    "provider",
    "seed",
    "config_hash",
];

impl BenchRecord {
    pub fn from_metrics(
        m: MetricsRecord,
        runs: u64,
        std_time_s: f64,
        provider: ProviderKind,
        seed: Option<u64>,
        config_hash: String,
    ) -> Self {
        BenchRecord {
            kind: m.kind,
            scale: m.scale,
            nnz: m.nnz,
            threads: m.threads,
            l2_demand_misses: m.l2_demand_misses,
            l3_demand_misses: m.l3_demand_misses,
            prefetch_l2_misses: m.prefetch_l2_misses,
            l2_stall_cycles: m.l2_stall_cycles,
            instructions: m.instructions,
            total_cycles: m.total_cycles,
            l2_miss_rate: m.l2_miss_rate,
            l3_miss_rate: m.l3_miss_rate,
            prefetch_miss_rate: m.prefetch_miss_rate,
            l2_stall_fraction: m.l2_stall_fraction,
            gflops: m.gflops,
            runtime_seconds: m.runtime_seconds,
            runs,
            mean_time_s: m.runtime_seconds,
            std_time_s,
            provider,
            seed,
            config_hash,
        }
    }

    pub fn metrics_record(&self) -> MetricsRecord {
        MetricsRecord {
            kind: self.kind.clone(),
            scale: self.scale,
            nnz: self.nnz,
            threads: self.threads,
            l2_demand_misses: self.l2_demand_misses,
            l3_demand_misses: self.l3_demand_misses,
            prefetch_l2_misses: self.prefetch_l2_misses,
            l2_stall_cycles: self.l2_stall_cycles,
            instructions: self.instructions,
            total_cycles: self.total_cycles,
            l2_miss_rate: self.l2_miss_rate,
            l3_miss_rate: self.l3_miss_rate,
            prefetch_miss_rate: self.prefetch_miss_rate,
            l2_stall_fraction: self.l2_stall_fraction,
            gflops: self.gflops,
            runtime_seconds: self.runtime_seconds,
        }
    }

    pub fn counters(&self) -> RawCounters {
        self.metrics_record().counters()
    }

    pub fn metrics(&self) -> Metrics {
        self.metrics_record().metrics()
    }

    /// Stored metrics equal a fresh computation from the stored raw fields,
    /// bit for bit, and the runtime column is the mean per-run time.
    pub fn is_consistent(&self) -> bool {
        self.metrics_record().is_consistent()
            && self.runtime_seconds.to_bits() == self.mean_time_s.to_bits()
    }

    /// Record with every wall-clock-derived column zeroed. Everything left is
    /// deterministic under the simulated provider.
    pub fn without_timing(&self) -> BenchRecord {
        BenchRecord {
            gflops: 0.0,
            runtime_seconds: 0.0,
            mean_time_s: 0.0,
            std_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// Mean and sample standard deviation of per-run wall times.
#[derive(Debug, Clone, Copy, Default)]
struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

struct Timing {
    runs: u64,
    mean: f64,
    std: f64,
}

fn time_runs(
    a: &CsrMatrix,
    x: &[f64],
    y: &mut [f64],
    threads: usize,
    warmup: u32,
    runs: u64,
) -> Result<Timing> {
    let pool = SpmvPool::new(threads)?;
    for _ in 0..warmup {
        pool.run(a, x, y)?;
    }
    let mut stats = RunningStats::default();
    for _ in 0..runs {
        let t0 = Instant::now();
        pool.run(a, x, y)?;
        stats.push(t0.elapsed().as_secs_f64());
    }
    // A pass on a tiny matrix can finish below the clock's resolution.
    let mean = stats.mean.max(f64::MIN_POSITIVE);
    Ok(Timing {
        runs,
        mean,
        std: stats.std(),
    })
}

fn count_events(plan: &BenchPlan, a: &CsrMatrix, x: &[f64], threads: u32) -> Result<RawCounters> {
    match plan.provider {
        ProviderKind::Simulated => {
            let cfg = CacheConfig {
                cores: threads,
                ..plan.cache.clone()
            };
            let r = simulate_spmv(a, &ArrayLayout::for_matrix(a), &cfg, plan.sim_warmup)?;
            Ok(simulated_counters(&r, &plan.instructions))
        }
        ProviderKind::Hardware => {
            let mut y = vec![0.0; a.nrows()];
            let mut status = Ok(());
            let c = collect_hardware(
                || status = spmv_parallel_into(a, x, &mut y, threads as usize),
                &plan.events,
            )?;
            status?;
            Ok(c)
        }
    }
}

/// Runs the plan against an already-built matrix.
pub fn run_bench_on(plan: &BenchPlan, a: &CsrMatrix) -> Result<Vec<BenchRecord>> {
    plan.validate()?;
    if a.nnz() == 0 {
        return Err(Error::InvalidArgument("matrix has no nonzeros".into()));
    }
    let nnz = a.nnz() as u64;
    let runs = plan.runs.unwrap_or_else(|| num_runs(nnz));
    let x = vec![1.0; a.ncols()];
    let mut y = vec![0.0; a.nrows()];
    let hash = plan.config_hash();

    let mut out = Vec::with_capacity(plan.threads.len());
    for &t in &plan.threads {
        let timing = time_runs(a, &x, &mut y, t as usize, plan.warmup, runs)?;
        let counters = count_events(plan, a, &x, t)?;
        let m = MetricsRecord::new(
            plan.source.kind_label(),
            plan.source.scale(),
            nnz,
            t,
            counters,
            timing.mean,
        )?;
        out.push(BenchRecord::from_metrics(
            m,
            timing.runs,
            timing.std,
            plan.provider,
            plan.source.seed(),
            hash.clone(),
        ));
    }
    if let Some(path) = &plan.output {
        report::write_with_metadata(&out, plan, path, None)?;
    }
    Ok(out)
}

pub fn run_bench(plan: &BenchPlan) -> Result<Vec<BenchRecord>> {
    plan.validate()?;
    let a = plan.source.load()?;
    run_bench_on(plan, &a)
}

/// Output metadata: the measurement choices behind a record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub provider: ProviderKind,
    pub warmup_runs: u32,
    pub sim_warmup_passes: u32,
    pub runs_override: Option<u64>,
    pub thread_pinning: String,
    pub x_init: String,
    pub instructions: InstructionModel,
    pub cache: Option<CacheConfig>,
    pub events: Option<EventMap>,
    pub partial: bool,
    pub error: Option<String>,
}

impl RunMetadata {
    pub fn for_plan(plan: &BenchPlan) -> Self {
        RunMetadata {
            provider: plan.provider,
            warmup_runs: plan.warmup,
            sim_warmup_passes: plan.sim_warmup,
            runs_override: plan.runs,
            thread_pinning: "unpinned; scheduler placement".into(),
            x_init: "ones".into(),
            instructions: plan.instructions,
            cache: (plan.provider == ProviderKind::Simulated).then(|| plan.cache.clone()),
            events: (plan.provider == ProviderKind::Hardware).then(|| plan.events.clone()),
            partial: false,
            error: None,
        }
    }
}

/// `report.csv` -> `report.csv.meta.json`.
pub fn metadata_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::spmv;

    #[test]
    fn run_count_rule() {
        assert_eq!(num_runs(16_384), 524_288);
        assert_eq!(num_runs(603_979_776), 14);
        assert_eq!(num_runs(1 << 34), 1);
        assert_eq!(num_runs(1), 1 << 33);
        for nnz in [1u64, 7, 2304, 9 << 20, (1 << 33) - 1, 1 << 33, 1 << 40] {
            let w = nnz * num_runs(nnz);
            assert!(
                nnz >= 1 << 33 || (w > (1 << 33) - nnz && w <= 1 << 33),
                "{nnz}"
            );
        }
    }

    #[test]
    fn running_stats() {
        let mut s = RunningStats::default();
        for x in [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0] {
            s.push(x);
        }
        assert!((s.mean - 5.0).abs() < 1e-12);
        assert!((s.std() - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        let mut one = RunningStats::default();
        one.push(3.0);
        assert_eq!(one.std(), 0.0);
    }

    fn small_plan() -> BenchPlan {
        let mut p = BenchPlan::new(MatrixSource::Generated(GenSpec::fd9(6)));
        p.threads = vec![1, 3];
        p.runs = Some(5);
        p.warmup = 1;
        p
    }

    #[test]
    fn plan_validation() {
        let mut p = small_plan();
        p.threads.clear();
        assert!(p.validate().is_err());
        let mut p = small_plan();
        p.threads = vec![2, 0];
        assert!(p.validate().is_err());
        let mut p = small_plan();
        p.runs = Some(0);
        assert!(p.validate().is_err());
        #[cfg(not(feature = "hardware"))]
        {
            let mut p = small_plan();
            p.provider = ProviderKind::Hardware;
            assert!(matches!(run_bench(&p), Err(Error::Capability(_))));
        }
    }

    #[test]
    fn one_record_per_thread_count() {
        let recs = run_bench(&small_plan()).unwrap();
        assert_eq!(recs.len(), 2);
        for (r, t) in recs.iter().zip([1, 3]) {
            assert_eq!(r.threads, t);
            assert_eq!(r.nnz, 9 * 64);
            assert_eq!(r.runs, 5);
            assert_eq!(r.kind, "fd9");
            assert_eq!(r.scale, Some(6));
            assert_eq!(r.seed, None);
            assert!(r.gflops > 0.0 && r.mean_time_s > 0.0 && r.std_time_s >= 0.0);
            assert!(r.is_consistent());
        }
    }

    #[test]
    fn repeated_passes_do_not_change_the_result() {
        let a = MatrixSource::Generated(GenSpec::rmat(7, 3)).load().unwrap();
        let x = vec![1.0; a.ncols()];
        let once = spmv(&a, &x).unwrap();
        let mut y = vec![0.0; a.nrows()];
        time_runs(&a, &x, &mut y, 4, 2, 50).unwrap();
        assert_eq!(y, once);
    }

    #[test]
    fn simulated_counters_do_not_depend_on_timing() {
        let a = run_bench(&small_plan()).unwrap();
        let b = run_bench(&small_plan()).unwrap();
        let strip = |v: &[BenchRecord]| {
            v.iter()
                .map(BenchRecord::without_timing)
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }
}
