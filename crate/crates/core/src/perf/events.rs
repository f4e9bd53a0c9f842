//! Logical counter names and their platform event strings.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six counters every provider must supply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogicalEvent {
    L2DemandMisses,
    L3DemandMisses,
    PrefetchL2Misses,
    L2StallCycles,
    Instructions,
    TotalCycles,
}

impl LogicalEvent {
    pub const ALL: [LogicalEvent; 6] = [
        LogicalEvent::L2DemandMisses,
        LogicalEvent::L3DemandMisses,
        LogicalEvent::PrefetchL2Misses,
        LogicalEvent::L2StallCycles,
        LogicalEvent::Instructions,
        LogicalEvent::TotalCycles,
    ];

    pub fn key(self) -> &'static str {
        match self {
            LogicalEvent::L2DemandMisses => "l2_demand_misses",
            LogicalEvent::L3DemandMisses => "l3_demand_misses",
            LogicalEvent::PrefetchL2Misses => "prefetch_l2_misses",
            LogicalEvent::L2StallCycles => "l2_stall_cycles",
            LogicalEvent::Instructions => "instructions",
            LogicalEvent::TotalCycles => "total_cycles",
        }
    }

    /// Intel Sandy Bridge identifiers.
    pub fn default_platform_name(self) -> &'static str {
        match self {
            LogicalEvent::L2DemandMisses => "MEM_LOAD_UOPS_RETIRED.L2_MISS",
            LogicalEvent::L3DemandMisses => "MEM_LOAD_UOPS_RETIRED.LLC_MISS",
            LogicalEvent::PrefetchL2Misses => "L2_RQSTS.PF_MISS",
            LogicalEvent::L2StallCycles => "CYCLE_ACTIVITY.STALL_CYCLES_L2_PENDING",
            LogicalEvent::Instructions => "INST_RETIRED.ANY",
            LogicalEvent::TotalCycles => "CPU_CLK_UNHALTED.THREAD",
        }
    }
}

impl fmt::Display for LogicalEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Logical name to platform event string, loaded from TOML:
///
/// ```toml
/// [events]
/// l2_demand_misses = "MEM_LOAD_UOPS_RETIRED.L2_MISS"
/// instructions = "instructions"
/// l2_stall_cycles = "raw:0x050005a3"
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMap {
    pub events: BTreeMap<String, String>,
}

impl Default for EventMap {
    fn default() -> Self {
        EventMap {
            events: LogicalEvent::ALL
                .iter()
                .map(|e| (e.key().to_string(), e.default_platform_name().to_string()))
                .collect(),
        }
    }
}

impl EventMap {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let map: EventMap = toml::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        let known: Vec<&str> = LogicalEvent::ALL.iter().map(|e| e.key()).collect();
        if let Some(extra) = map.events.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Format(format!("unknown logical event `{extra}`")));
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn platform_name(&self, e: LogicalEvent) -> Result<&str> {
        self.events
            .get(e.key())
            .map(String::as_str)
            .ok_or_else(|| Error::Capability(format!("event map has no entry for `{e}`")))
    }

    /// Resolves all six entries, failing on the first missing or unknown one.
    pub fn resolve_all(&self) -> Result<[(LogicalEvent, PlatformEvent); 6]> {
        let mut out = [(LogicalEvent::Instructions, PlatformEvent::Instructions); 6];
        for (slot, e) in out.iter_mut().zip(LogicalEvent::ALL) {
            let name = self.platform_name(e)?;
            let ev = resolve_event(name).ok_or_else(|| {
                Error::Capability(format!("unsupported platform event `{name}` for `{e}`"))
            })?;
            *slot = (e, ev);
        }
        Ok(out)
    }
}

/// What the OS counter interface is asked to count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlatformEvent {
    Instructions,
    Cycles,
    /// Model-specific raw encoding: event | umask << 8 | cmask << 24.
    Raw(u64),
}

/// Maps a platform event string to something the kernel can count.
/// Accepts `instructions`, `cycles`, `raw:0x...` and the Sandy Bridge names.
pub fn resolve_event(name: &str) -> Option<PlatformEvent> {
    let name = name.trim();
    if let Some(hex) = name.strip_prefix("raw:") {
        let hex = hex.trim_start_matches("0x").trim_start_matches("0X");
        return u64::from_str_radix(hex, 16).ok().map(PlatformEvent::Raw);
    }
    Some(match name {
        "instructions" | "INST_RETIRED.ANY" => PlatformEvent::Instructions,
        "cycles" | "CPU_CLK_UNHALTED.THREAD" => PlatformEvent::Cycles,
        "MEM_LOAD_UOPS_RETIRED.L2_MISS" => PlatformEvent::Raw(0x10d1),
        "MEM_LOAD_UOPS_RETIRED.LLC_MISS" => PlatformEvent::Raw(0x20d1),
        "L2_RQSTS.PF_MISS" => PlatformEvent::Raw(0x8024),
        "CYCLE_ACTIVITY.STALL_CYCLES_L2_PENDING" => PlatformEvent::Raw(0x0500_05a3),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_map_resolves_every_event() {
        let m = EventMap::default();
        let r = m.resolve_all().unwrap();
        assert_eq!(
            r[0],
            (LogicalEvent::L2DemandMisses, PlatformEvent::Raw(0x10d1))
        );
        assert_eq!(
            r[4],
            (LogicalEvent::Instructions, PlatformEvent::Instructions)
        );
        assert_eq!(r[5], (LogicalEvent::TotalCycles, PlatformEvent::Cycles));
    }

    #[test]
    fn missing_entry_names_the_event() {
        let m = EventMap::from_toml_str("[events]\ninstructions = \"instructions\"\n").unwrap();
        let err = m.resolve_all().unwrap_err();
        assert!(
            matches!(&err, Error::Capability(s) if s.contains("l2_demand_misses")),
            "{err}"
        );
    }

    #[test]
    fn unknown_platform_event_is_capability_error() {
        let mut m = EventMap::default();
        m.events
            .insert("l2_stall_cycles".into(), "CYCLE_ACTIVITY.BOGUS".into());
        assert!(matches!(m.resolve_all(), Err(Error::Capability(s)) if s.contains("BOGUS")));
    }

    #[test]
    fn raw_syntax_and_toml_roundtrip() {
        assert_eq!(
            resolve_event("raw:0x1234"),
            Some(PlatformEvent::Raw(0x1234))
        );
        assert_eq!(resolve_event("raw:zz"), None);
        let m = EventMap::default();
        let s = toml::to_string(&m).unwrap();
        assert_eq!(EventMap::from_toml_str(&s).unwrap(), m);
        assert!(EventMap::from_toml_str("[events]\nl4_misses = \"x\"\n").is_err());
    }
}
