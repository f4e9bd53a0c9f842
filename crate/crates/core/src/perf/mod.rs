//! Counter collection and derived metrics.
//!
//! Both providers produce a [`RawCounters`]; everything downstream of that
//! is provider-agnostic. Counts are summed over threads, so
//! `total_cycles` is thread-cycles and the stall fraction stays in [0, 1].

pub mod events;
#[cfg(feature = "hardware")]
mod hardware;
pub mod metrics;
pub mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use events::{resolve_event, EventMap, LogicalEvent, PlatformEvent};
pub use metrics::{
    gflops, l2_miss_rate, l2_stall_fraction, l3_miss_rate, prefetch_miss_rate, Metrics,
    MetricsRecord, RawCounters, METRICS_COLUMNS,
};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Hardware,
    Simulated,
}

impl ProviderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProviderKind::Hardware => "hardware",
            ProviderKind::Simulated => "simulated",
        }
    }

    /// Whether this build can collect from the provider at all.
    pub fn compiled_in(self) -> bool {
        match self {
            ProviderKind::Hardware => cfg!(feature = "hardware"),
            ProviderKind::Simulated => true,
        }
    }
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hardware" | "hw" => Ok(ProviderKind::Hardware),
            "simulated" | "sim" => Ok(ProviderKind::Simulated),
            other => Err(Error::InvalidArgument(format!(
                "unknown provider `{other}`"
            ))),
        }
    }
}

/// Collects the six counters around `work` using the OS counter interface.
#[cfg(feature = "hardware")]
pub fn collect_hardware<F: FnOnce()>(work: F, map: &EventMap) -> Result<RawCounters> {
    hardware::collect_hardware(work, map)
}

/// Collects the six counters around `work` using the OS counter interface.
#[cfg(not(feature = "hardware"))]
pub fn collect_hardware<F: FnOnce()>(_work: F, map: &EventMap) -> Result<RawCounters> {
    map.resolve_all()?;
    Err(Error::Capability(
        "built without the `hardware` feature".into(),
    ))
}
