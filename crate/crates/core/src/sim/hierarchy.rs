//! Multi-level cache simulation.
//!
//! Each core owns an L1D, an L2 and a stream prefetcher; all cores share one
//! L3 and DRAM. A demand miss at one level probes the next, and the line is
//! filled into every level it passed on the way back (write-allocate,
//! write-back). With `l3_bypass` the L3 is neither probed nor filled.
//!
//! Timing is a stall model only: every L2 demand miss stalls for its service
//! latency minus the L2 hit latency. Lines served from DRAM pay the DRAM
//! latency on top of the L3 lookup, unless the L3 is bypassed. Total cycles
//! are `compute_cycles_per_nnz * nnz` plus the stalls.

use serde::{Deserialize, Serialize};

use super::cache::SetAssocCache;
use super::config::CacheConfig;
use super::prefetch::{CongestionWindow, StreamPrefetcher};
use super::trace::{Access, AccessKind, AccessTrace, ArrayLayout, SpmvAccesses, Stream};
use crate::error::{Error, Result};
use crate::sparse::{row_blocks, CsrMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelStats {
    pub demand_hits: u64,
    pub demand_misses: u64,
    /// Lines installed at this level by the prefetcher.
    pub prefetch_fills: u64,
    /// Demand hits on a prefetched line before any other demand use.
    pub prefetch_hits: u64,
    /// Dirty lines evicted from this level.
    pub writebacks: u64,
}

impl LevelStats {
    pub fn demand_accesses(&self) -> u64 {
        self.demand_hits + self.demand_misses
    }

    pub fn miss_ratio(&self) -> f64 {
        match self.demand_accesses() {
            0 => 0.0,
            n => self.demand_misses as f64 / n as f64,
        }
    }

    fn add(&mut self, o: &LevelStats) {
        self.demand_hits += o.demand_hits;
        self.demand_misses += o.demand_misses;
        self.prefetch_fills += o.prefetch_fills;
        self.prefetch_hits += o.prefetch_hits;
        self.writebacks += o.writebacks;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DramStats {
    pub demand_reads: u64,
    pub prefetch_reads: u64,
    pub writebacks: u64,
}

/// A tally split by array.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamCounts {
    pub rowptr: u64,
    pub colidx: u64,
    pub values: u64,
    pub x: u64,
    pub y: u64,
}

impl StreamCounts {
    pub fn get(&self, s: Stream) -> u64 {
        match s {
            Stream::RowPtr => self.rowptr,
            Stream::ColIdx => self.colidx,
            Stream::Values => self.values,
            Stream::X => self.x,
            Stream::Y => self.y,
        }
    }

    fn slot(&mut self, s: Stream) -> &mut u64 {
        match s {
            Stream::RowPtr => &mut self.rowptr,
            Stream::ColIdx => &mut self.colidx,
            Stream::Values => &mut self.values,
            Stream::X => &mut self.x,
            Stream::Y => &mut self.y,
        }
    }

    pub fn total(&self) -> u64 {
        self.rowptr + self.colidx + self.values + self.x + self.y
    }

    fn add(&mut self, o: &StreamCounts) {
        for s in Stream::ALL {
            *self.slot(s) += o.get(s);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreStats {
    pub l1: LevelStats,
    pub l2: LevelStats,
    /// Times an armed stream asked for lines.
    pub prefetch_requests: u64,
    /// Prefetch requests dropped by the congestion shutoff.
    pub prefetch_suppressed: u64,
    pub l2_stall_cycles: u64,
    /// L2 demand lookups (L1 misses) by array.
    pub l2_stream_accesses: StreamCounts,
    /// L2 demand misses by array.
    pub l2_stream_misses: StreamCounts,
    pub nnz: u64,
    pub nrows: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub l1: LevelStats,
    pub l2: LevelStats,
    pub l3: LevelStats,
    pub dram: DramStats,
    pub l2_stall_cycles: u64,
    pub compute_cycles: u64,
    pub total_cycles: u64,
    pub accesses: u64,
    pub l2_stream_accesses: StreamCounts,
    pub l2_stream_misses: StreamCounts,
    pub nnz: u64,
    pub nrows: u64,
    pub per_core: Vec<CoreStats>,
}

impl SimResult {
    /// Fraction of one array's L2 lookups that missed.
    pub fn l2_stream_miss_ratio(&self, s: Stream) -> f64 {
        match self.l2_stream_accesses.get(s) {
            0 => 0.0,
            n => self.l2_stream_misses.get(s) as f64 / n as f64,
        }
    }
}

struct Core {
    l1: SetAssocCache,
    l2: SetAssocCache,
    prefetcher: StreamPrefetcher,
    stats: CoreStats,
}

/// Mutable simulation state: caches, prefetchers and tallies.
pub struct Hierarchy {
    cfg: CacheConfig,
    line_shift: u32,
    cores: Vec<Core>,
    l3: SetAssocCache,
    l3_stats: LevelStats,
    dram: DramStats,
    congestion: CongestionWindow,
    accesses: u64,
}

fn level_cache(cfg: &CacheConfig, level: &super::config::LevelConfig) -> SetAssocCache {
    SetAssocCache::new(
        level.sets(cfg.line_bytes) as usize,
        level.associativity as usize,
    )
}

impl Hierarchy {
    pub fn new(cfg: &CacheConfig) -> Result<Self> {
        cfg.validate()?;
        let cores = (0..cfg.cores)
            .map(|_| Core {
                l1: level_cache(cfg, &cfg.l1),
                l2: level_cache(cfg, &cfg.l2),
                prefetcher: StreamPrefetcher::new(cfg.prefetch, cfg.line_bytes),
                stats: CoreStats::default(),
            })
            .collect();
        Ok(Hierarchy {
            cfg: cfg.clone(),
            line_shift: cfg.line_bytes.trailing_zeros(),
            cores,
            l3: level_cache(cfg, &cfg.l3),
            l3_stats: LevelStats::default(),
            dram: DramStats::default(),
            congestion: CongestionWindow::new(
                cfg.prefetch.congestion_window,
                cfg.prefetch.congestion_threshold,
            ),
            accesses: 0,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn cores(&self) -> usize {
        self.cores.len()
    }

    /// Zeroes every tally but keeps cache, prefetcher and congestion state,
    /// so a measured pass can follow warm-up passes.
    pub fn reset_stats(&mut self) {
        for c in &mut self.cores {
            c.stats = CoreStats::default();
        }
        self.l3_stats = LevelStats::default();
        self.dram = DramStats::default();
        self.accesses = 0;
    }

    /// Credits the work (nonzeros and rows) of one pass to a core.
    pub fn add_work(&mut self, core: usize, nnz: u64, nrows: u64) {
        self.cores[core].stats.nnz += nnz;
        self.cores[core].stats.nrows += nrows;
    }

    fn l3_dirty_writeback(&mut self, line: u64) {
        if self.cfg.l3_bypass || !self.l3.mark_dirty(line) {
            self.dram.writebacks += 1;
        }
    }

    /// Fetches `line` from beyond the L2. Returns whether DRAM served it.
    fn fetch_beyond_l2(&mut self, line: u64, demand: bool) -> bool {
        if self.cfg.l3_bypass {
            if demand {
                self.dram.demand_reads += 1;
            } else {
                self.dram.prefetch_reads += 1;
            }
            return true;
        }
        if self.l3.access(line, false).is_some() {
            if demand {
                self.l3_stats.demand_hits += 1;
            }
            return false;
        }
        if demand {
            self.l3_stats.demand_misses += 1;
            self.dram.demand_reads += 1;
        } else {
            self.l3_stats.prefetch_fills += 1;
            self.dram.prefetch_reads += 1;
        }
        if let Some(ev) = self.l3.insert(line, false, false) {
            if ev.dirty {
                self.l3_stats.writebacks += 1;
                self.dram.writebacks += 1;
            }
        }
        true
    }

    fn fill_l2(&mut self, core: usize, line: u64, prefetched: bool) {
        if let Some(ev) = self.cores[core].l2.insert(line, false, prefetched) {
            if ev.dirty {
                self.cores[core].stats.l2.writebacks += 1;
                self.l3_dirty_writeback(ev.line);
            }
        }
    }

    fn fill_l1(&mut self, core: usize, line: u64, dirty: bool) {
        if let Some(ev) = self.cores[core].l1.insert(line, dirty, false) {
            if ev.dirty {
                self.cores[core].stats.l1.writebacks += 1;
                if !self.cores[core].l2.mark_dirty(ev.line) {
                    self.l3_dirty_writeback(ev.line);
                }
            }
        }
    }

    fn issue_prefetches(&mut self, core: usize, lines: std::ops::RangeInclusive<u64>) {
        for line in lines {
            if self.cores[core].l2.contains(line) {
                continue;
            }
            self.cores[core].stats.l2.prefetch_fills += 1;
            self.fetch_beyond_l2(line, false);
            self.fill_l2(core, line, true);
        }
    }

    /// Simulates one demand access issued by `core`.
    #[inline]
    pub fn access(&mut self, core: usize, ev: Access) {
        self.accesses += 1;
        let line = ev.addr >> self.line_shift;
        let write = ev.kind == AccessKind::Write;

        let c = &mut self.cores[core];
        if c.l1.access(line, write).is_some() {
            c.stats.l1.demand_hits += 1;
            self.congestion.record(false);
            return;
        }
        c.stats.l1.demand_misses += 1;
        *c.stats.l2_stream_accesses.slot(ev.stream) += 1;

        if let Some(hit) = c.l2.access(line, false) {
            c.stats.l2.demand_hits += 1;
            let wanted = if hit.first_prefetch_use {
                c.stats.l2.prefetch_hits += 1;
                c.prefetcher.on_prefetch_hit(line)
            } else {
                None
            };
            self.congestion.record(false);
            self.fill_l1(core, line, write);
            if let Some(lines) = wanted {
                self.request_prefetch(core, lines);
            }
            return;
        }
        c.stats.l2.demand_misses += 1;
        *c.stats.l2_stream_misses.slot(ev.stream) += 1;
        let wanted = if self.cfg.prefetch.enabled {
            c.prefetcher.on_miss(line)
        } else {
            None
        };

        let from_dram = self.fetch_beyond_l2(line, true);
        let service = if !from_dram {
            self.cfg.l3.hit_latency
        } else if self.cfg.l3_bypass {
            self.cfg.dram_latency
        } else {
            self.cfg.l3.hit_latency + self.cfg.dram_latency
        };
        self.cores[core].stats.l2_stall_cycles +=
            u64::from(service.saturating_sub(self.cfg.l2.hit_latency));
        self.congestion.record(from_dram);

        self.fill_l2(core, line, false);
        self.fill_l1(core, line, write);

        if let Some(lines) = wanted {
            self.request_prefetch(core, lines);
        }
    }

    fn request_prefetch(&mut self, core: usize, lines: std::ops::RangeInclusive<u64>) {
        self.cores[core].stats.prefetch_requests += 1;
        if self.congestion.congested() {
            self.cores[core].stats.prefetch_suppressed += 1;
        } else {
            self.issue_prefetches(core, lines);
        }
    }

    pub fn result(&self) -> SimResult {
        let mut r = SimResult {
            l3: self.l3_stats,
            dram: self.dram,
            accesses: self.accesses,
            per_core: self.cores.iter().map(|c| c.stats).collect(),
            ..SimResult::default()
        };
        for c in &r.per_core {
            r.l1.add(&c.l1);
            r.l2.add(&c.l2);
            r.l2_stall_cycles += c.l2_stall_cycles;
            r.l2_stream_accesses.add(&c.l2_stream_accesses);
            r.l2_stream_misses.add(&c.l2_stream_misses);
            r.nnz += c.nnz;
            r.nrows += c.nrows;
        }
        r.compute_cycles = u64::from(self.cfg.compute_cycles_per_nnz) * r.nnz;
        r.total_cycles = r.compute_cycles + r.l2_stall_cycles;
        r
    }

    /// Replays one stream per core, interleaved round-robin one event per
    /// core per step. Exhausted streams drop out of the rotation.
    pub fn run_interleaved<I>(&mut self, streams: Vec<I>) -> Result<()>
    where
        I: Iterator<Item = Access>,
    {
        if streams.len() != self.cores.len() {
            return Err(Error::InvalidArgument(format!(
                "{} access streams for {} cores",
                streams.len(),
                self.cores.len()
            )));
        }
        if let [_] = streams.as_slice() {
            for ev in streams.into_iter().next().unwrap() {
                self.access(0, ev);
            }
            return Ok(());
        }
        let mut live: Vec<(usize, I)> = streams.into_iter().enumerate().collect();
        while !live.is_empty() {
            live.retain_mut(|(core, it)| match it.next() {
                Some(ev) => {
                    self.access(*core, ev);
                    true
                }
                None => false,
            });
        }
        Ok(())
    }
}

/// Single-core simulation of a trace from cold caches. `cfg.cores` is
/// ignored.
pub fn simulate(trace: &AccessTrace, cfg: &CacheConfig) -> Result<SimResult> {
    simulate_steady(trace, cfg, 0)
}

/// Replays the trace `warmup_passes` times untallied, then once tallied.
pub fn simulate_steady(
    trace: &AccessTrace,
    cfg: &CacheConfig,
    warmup_passes: u32,
) -> Result<SimResult> {
    let cfg = CacheConfig {
        cores: 1,
        ..cfg.clone()
    };
    simulate_multicore_steady(std::slice::from_ref(trace), &cfg, warmup_passes)
}

/// One trace per core; private L1/L2/prefetcher, shared L3.
pub fn simulate_multicore(traces: &[AccessTrace], cfg: &CacheConfig) -> Result<SimResult> {
    simulate_multicore_steady(traces, cfg, 0)
}

pub fn simulate_multicore_steady(
    traces: &[AccessTrace],
    cfg: &CacheConfig,
    warmup_passes: u32,
) -> Result<SimResult> {
    if traces.len() != cfg.cores as usize {
        return Err(Error::InvalidArgument(format!(
            "{} traces for {} cores",
            traces.len(),
            cfg.cores
        )));
    }
    let mut h = Hierarchy::new(cfg)?;
    for _ in 0..warmup_passes {
        h.run_interleaved(traces.iter().map(|t| t.events.iter().copied()).collect())?;
    }
    h.reset_stats();
    h.run_interleaved(traces.iter().map(|t| t.events.iter().copied()).collect())?;
    for (core, t) in traces.iter().enumerate() {
        h.add_work(core, t.nnz, t.nrows);
    }
    Ok(h.result())
}

/// Simulates SpMV on `cfg.cores` cores, each running the same contiguous row
/// block the parallel kernel would give it. Accesses are generated on the fly,
/// so no trace is materialized.
pub fn simulate_spmv(
    a: &CsrMatrix,
    layout: &ArrayLayout,
    cfg: &CacheConfig,
    warmup_passes: u32,
) -> Result<SimResult> {
    layout.validate(a, cfg.line_bytes)?;
    let mut h = Hierarchy::new(cfg)?;
    let blocks = row_blocks(a.nrows(), cfg.cores as usize);
    let streams = || {
        blocks
            .iter()
            .map(|r| SpmvAccesses::new(a, *layout, r.clone()))
            .collect()
    };
    for _ in 0..warmup_passes {
        h.run_interleaved::<SpmvAccesses>(streams())?;
    }
    h.reset_stats();
    h.run_interleaved::<SpmvAccesses>(streams())?;
    for (core, rows) in blocks.iter().enumerate() {
        let nnz = if rows.is_empty() {
            0
        } else {
            u64::from(a.rowptr()[rows.end] - a.rowptr()[rows.start])
        };
        h.add_work(core, nnz, rows.len() as u64);
    }
    Ok(h.result())
}
