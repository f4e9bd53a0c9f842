//! Raw event counts and the five derived metrics.
//!
//! ```text
//! L2 miss rate        = 1000 * L2 demand misses       / instructions
//! L3 miss rate        = 1000 * L3 demand misses       / instructions
//! prefetch miss rate  = 1000 * prefetcher L2 misses   / instructions
//! L2 stall fraction   = L2 stall cycles / total cycles
//! GFLOPS              = 2 * nnz / runtime / 1e9
//! ```
//!
//! A high prefetch miss rate is good: it counts lines the prefetcher brought
//! into the L2 ahead of demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawCounters {
    pub l2_demand_misses: u64,
    pub l3_demand_misses: u64,
    pub prefetch_l2_misses: u64,
    pub l2_stall_cycles: u64,
    pub instructions: u64,
    pub total_cycles: u64,
}

impl RawCounters {
    pub fn validate(&self) -> Result<()> {
        if self.l2_stall_cycles > self.total_cycles {
            return Err(Error::InvalidArgument(format!(
                "stall cycles {} exceed total cycles {}",
                self.l2_stall_cycles, self.total_cycles
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, k: u64) -> RawCounters {
        RawCounters {
            l2_demand_misses: self.l2_demand_misses * k,
            l3_demand_misses: self.l3_demand_misses * k,
            prefetch_l2_misses: self.prefetch_l2_misses * k,
            l2_stall_cycles: self.l2_stall_cycles * k,
            instructions: self.instructions * k,
            total_cycles: self.total_cycles * k,
        }
    }

    pub fn saturating_add(&self, o: &RawCounters) -> RawCounters {
        RawCounters {
            l2_demand_misses: self.l2_demand_misses.saturating_add(o.l2_demand_misses),
            l3_demand_misses: self.l3_demand_misses.saturating_add(o.l3_demand_misses),
            prefetch_l2_misses: self.prefetch_l2_misses.saturating_add(o.prefetch_l2_misses),
            l2_stall_cycles: self.l2_stall_cycles.saturating_add(o.l2_stall_cycles),
            instructions: self.instructions.saturating_add(o.instructions),
            total_cycles: self.total_cycles.saturating_add(o.total_cycles),
        }
    }
}

fn per_thousand(events: u64, instructions: u64) -> Result<f64> {
    if instructions == 0 {
        return Err(Error::UndefinedMetric(
            "rate per instruction with zero instructions",
        ));
    }
    Ok(1e3 * events as f64 / instructions as f64)
}

pub fn l2_miss_rate(c: &RawCounters) -> Result<f64> {
    per_thousand(c.l2_demand_misses, c.instructions)
}

pub fn l3_miss_rate(c: &RawCounters) -> Result<f64> {
    per_thousand(c.l3_demand_misses, c.instructions)
}

pub fn prefetch_miss_rate(c: &RawCounters) -> Result<f64> {
    per_thousand(c.prefetch_l2_misses, c.instructions)
}

pub fn l2_stall_fraction(c: &RawCounters) -> Result<f64> {
    if c.total_cycles == 0 {
        return Err(Error::UndefinedMetric(
            "stall fraction with zero total cycles",
        ));
    }
    Ok(c.l2_stall_cycles as f64 / c.total_cycles as f64)
}

pub fn gflops(nnz: u64, runtime_seconds: f64) -> Result<f64> {
    if runtime_seconds.is_nan() || runtime_seconds <= 0.0 || !runtime_seconds.is_finite() {
        return Err(Error::UndefinedMetric(
            "GFLOPS needs a positive, finite runtime",
        ));
    }
    Ok(2.0 * nnz as f64 / runtime_seconds / 1e9)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub l2_miss_rate: f64,
    pub l3_miss_rate: f64,
    pub prefetch_miss_rate: f64,
    pub l2_stall_fraction: f64,
    pub gflops: f64,
}

impl Metrics {
    pub fn compute(c: &RawCounters, nnz: u64, runtime_seconds: f64) -> Result<Metrics> {
        Ok(Metrics {
            l2_miss_rate: l2_miss_rate(c)?,
            l3_miss_rate: l3_miss_rate(c)?,
            prefetch_miss_rate: prefetch_miss_rate(c)?,
            l2_stall_fraction: l2_stall_fraction(c)?,
            gflops: gflops(nnz, runtime_seconds)?,
        })
    }

    /// Bitwise comparison, so `-0.0 != 0.0` and NaNs compare by payload.
    pub fn bit_eq(&self, o: &Metrics) -> bool {
        self.as_array()
            .iter()
            .zip(o.as_array())
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.l2_miss_rate,
            self.l3_miss_rate,
            self.prefetch_miss_rate,
            self.l2_stall_fraction,
            self.gflops,
        ]
    }
}

/// Column order of a metrics record.
pub const METRICS_COLUMNS: [&str; 16] = [
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
];

/// Raw counters plus derived metrics for one (matrix, thread count) run.
/// Field order is the serialized column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
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
}

impl MetricsRecord {
    pub fn new(
        kind: impl Into<String>,
        scale: Option<u32>,
        nnz: u64,
        threads: u32,
        counters: RawCounters,
        runtime_seconds: f64,
    ) -> Result<Self> {
        counters.validate()?;
        let m = Metrics::compute(&counters, nnz, runtime_seconds)?;
        Ok(MetricsRecord {
            kind: kind.into(),
            scale,
            nnz,
            threads,
            l2_demand_misses: counters.l2_demand_misses,
            l3_demand_misses: counters.l3_demand_misses,
            prefetch_l2_misses: counters.prefetch_l2_misses,
            l2_stall_cycles: counters.l2_stall_cycles,
            instructions: counters.instructions,
            total_cycles: counters.total_cycles,
            l2_miss_rate: m.l2_miss_rate,
            l3_miss_rate: m.l3_miss_rate,
            prefetch_miss_rate: m.prefetch_miss_rate,
            l2_stall_fraction: m.l2_stall_fraction,
            gflops: m.gflops,
            runtime_seconds,
        })
    }

    pub fn counters(&self) -> RawCounters {
        RawCounters {
            l2_demand_misses: self.l2_demand_misses,
            l3_demand_misses: self.l3_demand_misses,
            prefetch_l2_misses: self.prefetch_l2_misses,
            l2_stall_cycles: self.l2_stall_cycles,
            instructions: self.instructions,
            total_cycles: self.total_cycles,
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            l2_miss_rate: self.l2_miss_rate,
            l3_miss_rate: self.l3_miss_rate,
            prefetch_miss_rate: self.prefetch_miss_rate,
            l2_stall_fraction: self.l2_stall_fraction,
            gflops: self.gflops,
        }
    }

    /// Recomputes the derived metrics from the stored raw fields.
    pub fn recompute(&self) -> Result<Metrics> {
        Metrics::compute(&self.counters(), self.nnz, self.runtime_seconds)
    }

    pub fn is_consistent(&self) -> bool {
        self.recompute()
            .map(|m| m.bit_eq(&self.metrics()))
            .unwrap_or(false)
    }
}
