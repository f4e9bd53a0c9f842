//! Sweeps over matrix sizes, record files and plot-data tables.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use super::{metadata_path, run_bench, BenchPlan, BenchRecord, MatrixSource, RunMetadata};
use crate::error::{Error, Result};
use crate::gen::GenSpec;
use crate::perf::table::{self, TableFormat};
use crate::sparse::io::write_atomic;

/// Metrics that get a plot-data table each.
pub const PLOT_METRICS: [&str; 5] = [
    "l2_miss_rate",
    "l3_miss_rate",
    "prefetch_miss_rate",
    "l2_stall_fraction",
    "gflops",
];

fn metric_value(r: &BenchRecord, metric: &str) -> Option<f64> {
    Some(match metric {
        "l2_miss_rate" => r.l2_miss_rate,
        "l3_miss_rate" => r.l3_miss_rate,
        "prefetch_miss_rate" => r.prefetch_miss_rate,
        "l2_stall_fraction" => r.l2_stall_fraction,
        "gflops" => r.gflops,
        _ => return None,
    })
}

/// Writes records atomically; `.json` paths get JSON, others CSV.
pub fn write_records(records: &[BenchRecord], path: &Path) -> Result<()> {
    let bytes = table::to_bytes(records, TableFormat::from_path(path))?;
    write_atomic(path, |w| Ok(w.write_all(&bytes)?))
}

pub fn load_records(path: &Path) -> Result<Vec<BenchRecord>> {
    table::load(path)
}

fn write_metadata(meta: &RunMetadata, output: &Path) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(meta)?;
    write_atomic(&metadata_path(output), |w| {
        w.write_all(&bytes)?;
        Ok(w.write_all(b"\n")?)
    })
}

pub(super) fn write_with_metadata(
    records: &[BenchRecord],
    plan: &BenchPlan,
    path: &Path,
    err: Option<&Error>,
) -> Result<()> {
    write_records(records, path)?;
    let mut meta = RunMetadata::for_plan(plan);
    meta.partial = err.is_some();
    meta.error = err.map(|e| e.to_string());
    write_metadata(&meta, path)
}

/// Runs `plan` once per scale, generating each matrix from `base` with the
/// scale replaced. On a failure the records gathered so far are written,
/// the metadata is marked partial, and the error is returned.
pub fn sweep(
    base: &GenSpec,
    scales: RangeInclusive<u32>,
    plan: &BenchPlan,
) -> Result<Vec<BenchRecord>> {
    if scales.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "empty scale range {}..={}",
            scales.start(),
            scales.end()
        )));
    }
    let mut records = Vec::new();
    let mut failure = None;
    for scale in scales {
        let point = BenchPlan {
            source: MatrixSource::Generated(GenSpec {
                scale,
                ..base.clone()
            }),
            output: None,
            ..plan.clone()
        };
        match run_bench(&point) {
            Ok(mut r) => records.append(&mut r),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    if let Some(path) = &plan.output {
        write_with_metadata(&records, plan, path, failure.as_ref())?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(records),
    }
}

/// Concatenates record files, sorted by (kind, nnz, threads). Files whose
/// `config_hash` values disagree are refused unless `force` is set.
pub fn merge_records(paths: &[PathBuf], force: bool) -> Result<Vec<BenchRecord>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(load_records(p)?);
    }
    let hashes: BTreeSet<&str> = all.iter().map(|r| r.config_hash.as_str()).collect();
    if hashes.len() > 1 && !force {
        let list: Vec<&str> = hashes.into_iter().collect();
        return Err(Error::MixedInputs(format!(
            "records come from different configurations: {}",
            list.join(", ")
        )));
    }
    all.sort_by(|a, b| (&a.kind, a.nnz, a.threads).cmp(&(&b.kind, b.nnz, b.threads)));
    Ok(all)
}

/// One metric for one matrix kind: a row per size, a column per thread count.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub kind: String,
    pub metric: &'static str,
    pub threads: Vec<u32>,
    pub rows: Vec<(Option<u32>, u64, Vec<Option<f64>>)>,
}

impl PlotTable {
    pub fn file_name(&self, stem: &str) -> String {
        format!("{stem}.{}.{}.csv", self.kind, self.metric)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["scale".to_string(), "nnz".to_string()];
        header.extend(self.threads.iter().map(|t| format!("threads_{t}")));
        w.write_record(&header)?;
        for (scale, nnz, values) in &self.rows {
            let mut row = vec![
                scale.map(|s| s.to_string()).unwrap_or_default(),
                nnz.to_string(),
            ];
            row.extend(
                values
                    .iter()
                    .map(|v| v.map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn plot_tables(records: &[BenchRecord]) -> Vec<PlotTable> {
    let mut by_kind: BTreeMap<&str, Vec<&BenchRecord>> = BTreeMap::new();
    for r in records {
        by_kind.entry(r.kind.as_str()).or_default().push(r);
    }
    let mut out = Vec::new();
    for (kind, recs) in by_kind {
        let threads: Vec<u32> = recs
            .iter()
            .map(|r| r.threads)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let sizes: BTreeSet<(u64, Option<u32>)> = recs.iter().map(|r| (r.nnz, r.scale)).collect();
        for metric in PLOT_METRICS {
            let rows = sizes
                .iter()
                .map(|&(nnz, scale)| {
                    let values = threads
                        .iter()
                        .map(|&t| {
                            recs.iter()
                                .rev()
                                .find(|r| r.nnz == nnz && r.scale == scale && r.threads == t)
                                .and_then(|r| metric_value(r, metric))
                        })
                        .collect();
                    (scale, nnz, values)
                })
                .collect();
            out.push(PlotTable {
                kind: kind.to_string(),
                metric,
                threads: threads.clone(),
                rows,
            });
        }
    }
    out
}

/// Writes every plot table under `dir` and returns the paths written.
pub fn write_plot_data(records: &[BenchRecord], dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in plot_tables(records) {
        let path = dir.join(t.file_name(stem));
        let bytes = t.to_csv()?;
        write_atomic(&path, |w| Ok(w.write_all(&bytes)?))?;
        written.push(path);
    }
    Ok(written)
}
