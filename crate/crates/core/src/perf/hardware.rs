//! Hardware counters through Linux `perf_event_open`.
//!
//! Counters are opened on the calling thread with inheritance, so threads
//! spawned inside the work unit are counted and summed into the totals.
//! Threads that already exist (a persistent pool) are not.

use std::cell::Cell;

use perf_event::events::{Hardware, Raw};
use perf_event::{Builder, Counter, ReadFormat};

use super::events::{EventMap, LogicalEvent, PlatformEvent};
use super::metrics::RawCounters;
use crate::error::{Error, Result};

thread_local! {
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
}

struct SessionGuard;

impl SessionGuard {
    fn acquire() -> Result<Self> {
        ACTIVE.with(|a| {
            if a.replace(true) {
                Err(Error::InvalidArgument(
                    "a counter session is already active on this thread".into(),
                ))
            } else {
                Ok(SessionGuard)
            }
        })
    }
}

impl Drop for SessionGuard {
    fn drop(&mut self) {
        ACTIVE.with(|a| a.set(false));
    }
}

fn open(ev: PlatformEvent, logical: LogicalEvent, name: &str) -> Result<Counter> {
    let mut b = match ev {
        PlatformEvent::Instructions => Builder::new(Hardware::INSTRUCTIONS),
        PlatformEvent::Cycles => Builder::new(Hardware::CPU_CYCLES),
        PlatformEvent::Raw(config) => Builder::new(Raw::new(config)),
    };
    b.inherit(true)
        .read_format(ReadFormat::TOTAL_TIME_ENABLED | ReadFormat::TOTAL_TIME_RUNNING)
        .build()
        .map_err(|e| Error::Capability(format!("cannot open `{name}` for `{logical}`: {e}")))
}

/// Runs `work` with the six counters enabled around it and nothing else.
/// Counts from multiplexed events are scaled by enabled/running time.
pub fn collect_hardware<F: FnOnce()>(work: F, map: &EventMap) -> Result<RawCounters> {
    let _guard = SessionGuard::acquire()?;
    let resolved = map.resolve_all()?;
    let mut counters = Vec::with_capacity(resolved.len());
    for (logical, ev) in resolved {
        counters.push((logical, open(ev, logical, map.platform_name(logical)?)?));
    }

    for (logical, c) in counters.iter_mut() {
        c.enable()
            .map_err(|e| Error::Capability(format!("cannot enable `{logical}`: {e}")))?;
    }
    work();
    for (_, c) in counters.iter_mut() {
        c.disable()?;
    }

    let mut out = RawCounters::default();
    for (logical, c) in counters.iter_mut() {
        let ct = c.read_count_and_time()?;
        let value = match (ct.time_enabled, ct.time_running) {
            (_, 0) => 0,
            (en, run) if en == run => ct.count,
            (en, run) => (ct.count as u128 * en as u128 / run as u128) as u64,
        };
        let slot = match logical {
            LogicalEvent::L2DemandMisses => &mut out.l2_demand_misses,
            LogicalEvent::L3DemandMisses => &mut out.l3_demand_misses,
            LogicalEvent::PrefetchL2Misses => &mut out.prefetch_l2_misses,
            LogicalEvent::L2StallCycles => &mut out.l2_stall_cycles,
            LogicalEvent::Instructions => &mut out.instructions,
            LogicalEvent::TotalCycles => &mut out.total_cycles,
        };
        *slot = value;
    }
    // Scaling can push a multiplexed stall count past the cycle count.
    out.l2_stall_cycles = out.l2_stall_cycles.min(out.total_cycles);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_session_rejected() {
        let _outer = SessionGuard::acquire().unwrap();
        assert!(SessionGuard::acquire().is_err());
    }

    #[test]
    fn noop_or_capability_error() {
        match collect_hardware(|| {}, &EventMap::default()) {
            Ok(c) => {
                assert!(c.instructions > 0);
                assert!(c.l2_stall_cycles <= c.total_cycles);
            }
            Err(Error::Capability(msg)) => eprintln!("hardware counters unavailable: {msg}"),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }
}
