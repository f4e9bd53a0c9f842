//! Trace-driven simulation of a private-L1/L2, shared-L3 hierarchy.

pub mod cache;
pub mod config;
pub mod hierarchy;
pub mod prefetch;
pub mod trace;

use serde::{Deserialize, Serialize};

pub use cache::SetAssocCache;
pub use config::{CacheConfig, LevelConfig, PrefetchConfig};
pub use hierarchy::{
    simulate, simulate_multicore, simulate_multicore_steady, simulate_spmv, simulate_steady,
    CoreStats, DramStats, Hierarchy, LevelStats, SimResult, StreamCounts,
};
pub use trace::{
    read_trace, trace_spmv, trace_spmv_rows, write_trace, Access, AccessKind, AccessTrace,
    ArrayLayout, SpmvAccesses, Stream,
};

use crate::perf::RawCounters;

/// Instruction counts attributed to a simulated pass. The simulator executes
/// no instructions; this only fixes the denominator of the per-instruction
/// rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionModel {
    pub per_nonzero: u64,
    pub per_row: u64,
}

impl Default for InstructionModel {
    fn default() -> Self {
        InstructionModel {
            per_nonzero: 10,
            per_row: 4,
        }
    }
}

impl InstructionModel {
    pub fn instructions(&self, nnz: u64, nrows: u64) -> u64 {
        self.per_nonzero * nnz + self.per_row * nrows
    }
}

/// Maps simulated tallies onto the six logical counters.
pub fn simulated_counters(r: &SimResult, model: &InstructionModel) -> RawCounters {
    RawCounters {
        l2_demand_misses: r.l2.demand_misses,
        l3_demand_misses: r.l3.demand_misses,
        prefetch_l2_misses: r.l2.prefetch_fills,
        l2_stall_cycles: r.l2_stall_cycles,
        instructions: model.instructions(r.nnz, r.nrows),
        total_cycles: r.total_cycles,
    }
}
