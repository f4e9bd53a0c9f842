use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use spmvlab::gen::{GenSpec, MatrixKind};
use spmvlab::perf::ProviderKind;

#[derive(Debug, Parser)]
#[command(name = "spmvlab", version, about = "SpMV cache-behaviour laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a matrix and print its size; write it when -o is given.
    Gen(GenArgs),
    /// Replay one SpMV pass through the cache model and print JSON.
    Simulate(SimulateArgs),
    /// Time SpMV and collect counters for each thread count.
    Bench(BenchArgs),
    /// Benchmark a generated matrix kind over a range of scales.
    Sweep(SweepArgs),
    /// Merge record files and write per-metric plot data.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateFlags {
    /// Matrix family: rmat or fd9.
    #[arg(long)]
    pub kind: MatrixKind,
    /// log2 of the row count.
    #[arg(long)]
    pub scale: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Randomly relabel rows and columns.
    #[arg(long)]
    pub permute: bool,
    /// Override the family's nonzeros per row.
    #[arg(long)]
    pub nnz_per_row: Option<u32>,
}

impl GenerateFlags {
    pub fn spec(&self) -> GenSpec {
        spec_for(
            self.kind,
            self.scale,
            self.seed,
            self.permute,
            self.nnz_per_row,
        )
    }
}

pub fn spec_for(
    kind: MatrixKind,
    scale: u32,
    seed: u64,
    permute: bool,
    nnz_per_row: Option<u32>,
) -> GenSpec {
    let mut spec = match kind {
        MatrixKind::Rmat => GenSpec::rmat(scale, seed),
        MatrixKind::Fd9 => GenSpec::fd9(scale),
    };
    spec.seed = seed;
    spec.permute = permute;
    if let Some(k) = nnz_per_row {
        spec.nnz_per_row = k;
    }
    spec
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub matrix: GenerateFlags,
    /// Output file; `.mtx` writes Matrix Market, anything else binary CSR.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CacheFlags {
    /// Named hierarchy: desk or sandy-bridge.
    #[arg(long, default_value = "desk", conflicts_with = "config")]
    pub preset: String,
    /// Cache configuration file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceFlags {
    /// Matrix file (binary CSR or `.mtx`).
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Generated matrix as `kind:scale[:seed][:perm]`, e.g. `rmat:12:7:perm`.
    #[arg(long)]
    pub gen: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: SourceFlags,
    #[command(flatten)]
    pub cache: CacheFlags,
    /// Simulated cores, each running its contiguous row block.
    #[arg(long, default_value_t = 1)]
    pub threads: u32,
    #[arg(long)]
    pub no_prefetch: bool,
    /// Send L2 misses straight to DRAM.
    #[arg(long)]
    pub no_l3: bool,
    /// Passes replayed before the counted one.
    #[arg(long, default_value_t = 1)]
    pub warmup: u32,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// Thread counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = spmvlab::bench::DEFAULT_THREADS)]
    pub threads: Vec<u32>,
    /// Timed passes per point; defaults to the constant-work rule.
    #[arg(long)]
    pub runs: Option<u64>,
    /// Untimed passes before timing.
    #[arg(long, default_value_t = 3)]
    pub warmup: u32,
    /// Counter source: simulated or hardware.
    #[arg(long, env = "SPMVLAB_PROVIDER", default_value = "simulated")]
    pub provider: ProviderKind,
    /// Logical-to-platform event map (TOML) for the hardware provider.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub no_prefetch: bool,
    #[arg(long)]
    pub no_l3: bool,
    #[command(flatten)]
    pub cache: CacheFlags,
    /// Record file; `.json` writes JSON, anything else CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: SourceFlags,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub kind: MatrixKind,
    /// Inclusive scale range, e.g. `8..14`.
    #[arg(long, value_parser = parse_scales)]
    pub scales: RangeInclusive<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep R-MAT in generator order instead of relabelling it.
    #[arg(long)]
    pub no_permute: bool,
    #[arg(long)]
    pub nnz_per_row: Option<u32>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Record files (CSV or JSON).
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Merge even when the inputs come from different configurations.
    #[arg(long)]
    pub force: bool,
    /// Directory for the plot-data tables.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// File-name prefix of the plot-data tables.
    #[arg(long, default_value = "report")]
    pub stem: String,
    /// Also write the merged records here.
    #[arg(long)]
    pub merged: Option<PathBuf>,
}

/// `a..b` and `a..=b` are both inclusive; a lone number is a single scale.
fn parse_scales(s: &str) -> Result<RangeInclusive<u32>, String> {
    let num = |t: &str| {
        t.trim()
            .parse::<u32>()
            .map_err(|_| format!("bad scale `{t}` in `{s}`"))
    };
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let v = num(s)?;
            (v, v)
        }
    };
    if lo > hi {
        return Err(format!("empty scale range `{s}`"));
    }
    Ok(lo..=hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn scale_ranges() {
        assert_eq!(parse_scales("8..14"), Ok(8..=14));
        assert_eq!(parse_scales("8..=14"), Ok(8..=14));
        assert_eq!(parse_scales("9"), Ok(9..=9));
        assert!(parse_scales("14..8").is_err());
        assert!(parse_scales("a..3").is_err());
    }
}
