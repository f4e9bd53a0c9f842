use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const KB: u64 = 1024;
const MB: u64 = 1024 * KB;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub capacity_bytes: u64,
    pub associativity: u32,
    /// Load-to-use latency of a hit at this level, in cycles.
    pub hit_latency: u32,
}

impl LevelConfig {
    pub fn lines(&self, line_bytes: u64) -> u64 {
        self.capacity_bytes / line_bytes
    }

    pub fn sets(&self, line_bytes: u64) -> u64 {
        self.lines(line_bytes) / u64::from(self.associativity)
    }
}

/// Next-line stream prefetcher feeding the L2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefetchConfig {
    pub enabled: bool,
    /// Consecutive ascending L2 demand misses within a page that arm a stream.
    pub trigger: u32,
    /// Lines fetched ahead of the triggering miss.
    pub degree: u32,
    /// Streams never cross this boundary.
    pub page_bytes: u64,
    /// Number of concurrently tracked streams.
    pub trackers: u32,
    /// Demand accesses in the congestion window.
    pub congestion_window: u32,
    /// Prefetching is suppressed while the fraction of windowed demand
    /// accesses served by DRAM exceeds this value.
    pub congestion_threshold: f64,
}

impl Default for PrefetchConfig {
    fn default() -> Self {
        PrefetchConfig {
            enabled: true,
            trigger: 2,
            degree: 4,
            page_bytes: 4096,
            trackers: 32,
            congestion_window: 1000,
            congestion_threshold: 0.1,
        }
    }
}

/// Private L1D and L2 per core, one shared L3, DRAM.
///
/// Latencies are model constants, not measurements. Replacement is true LRU
/// at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub line_bytes: u64,
    pub l1: LevelConfig,
    pub l2: LevelConfig,
    pub l3: LevelConfig,
    pub dram_latency: u32,
    pub prefetch: PrefetchConfig,
    /// L2 misses go straight to DRAM; the L3 is never probed or filled.
    pub l3_bypass: bool,
    pub cores: u32,
    pub compute_cycles_per_nnz: u32,
}

impl CacheConfig {
    /// Xeon E5-2690-like: 32KB L1D, 256KB L2, 20MB shared L3.
    pub fn sandy_bridge() -> Self {
        CacheConfig {
            line_bytes: 64,
            l1: LevelConfig {
                capacity_bytes: 32 * KB,
                associativity: 8,
                hit_latency: 4,
            },
            l2: LevelConfig {
                capacity_bytes: 256 * KB,
                associativity: 8,
                hit_latency: 12,
            },
            l3: LevelConfig {
                capacity_bytes: 20 * MB,
                associativity: 20,
                hit_latency: 30,
            },
            dram_latency: 200,
            prefetch: PrefetchConfig::default(),
            l3_bypass: false,
            cores: 1,
            compute_cycles_per_nnz: 2,
        }
    }

    /// Scaled-down hierarchy (2KB / 8KB / 64KB) whose capacity cliffs fall
    /// at matrix sizes that simulate in seconds.
    pub fn desk() -> Self {
        CacheConfig {
            l1: LevelConfig {
                capacity_bytes: 2 * KB,
                associativity: 8,
                hit_latency: 4,
            },
            l2: LevelConfig {
                capacity_bytes: 8 * KB,
                associativity: 8,
                hit_latency: 12,
            },
            l3: LevelConfig {
                capacity_bytes: 64 * KB,
                associativity: 16,
                hit_latency: 30,
            },
            ..CacheConfig::sandy_bridge()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "sandy-bridge" | "sandybridge" | "snb" => Ok(Self::sandy_bridge()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::InvalidConfig(format!(
                "unknown preset `{other}` (expected `sandy-bridge` or `desk`)"
            ))),
        }
    }

    pub fn levels(&self) -> [(&'static str, &LevelConfig); 3] {
        [("L1", &self.l1), ("L2", &self.l2), ("L3", &self.l3)]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !self.line_bytes.is_power_of_two() || self.line_bytes < 8 {
            return bad(format!(
                "line size {} must be a power of two >= 8",
                self.line_bytes
            ));
        }
        for (name, level) in self.levels() {
            if level.associativity == 0 {
                return bad(format!("{name} associativity must be positive"));
            }
            let way_bytes = self.line_bytes * u64::from(level.associativity);
            if level.capacity_bytes == 0 || level.capacity_bytes % way_bytes != 0 {
                return bad(format!(
                    "{name} capacity {} is not a multiple of line size x associativity ({way_bytes})",
                    level.capacity_bytes
                ));
            }
        }
        if self.l1.capacity_bytes > self.l2.capacity_bytes
            || self.l2.capacity_bytes > self.l3.capacity_bytes
        {
            return bad("capacities must be nondecreasing from L1 to L3".into());
        }
        let p = &self.prefetch;
        if !(p.congestion_threshold > 0.0 && p.congestion_threshold <= 1.0) {
            return bad(format!(
                "congestion threshold {} must lie in (0, 1]",
                p.congestion_threshold
            ));
        }
        if p.trigger == 0 || p.congestion_window == 0 || p.trackers == 0 {
            return bad("prefetch trigger, window and tracker count must be positive".into());
        }
        if !p.page_bytes.is_power_of_two() || p.page_bytes < self.line_bytes {
            return bad(format!(
                "prefetch page {} must be a power of two no smaller than a line",
                p.page_bytes
            ));
        }
        if self.cores == 0 {
            return bad("at least one core is required".into());
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: CacheConfig =
            toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("cache config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Short stable digest identifying this configuration in reports.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("cache config always serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self::sandy_bridge()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        CacheConfig::sandy_bridge().validate().unwrap();
        CacheConfig::desk().validate().unwrap();
        assert_eq!(CacheConfig::sandy_bridge().l3.sets(64), 16_384);
        assert_eq!(CacheConfig::desk().l2.sets(64), 16);
        assert!(CacheConfig::preset("nope").is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = CacheConfig::desk();
        c.line_bytes = 48;
        assert!(c.validate().is_err());
        let mut c = CacheConfig::desk();
        c.l3.associativity = 20; // 1024 lines do not split into 20 ways
        assert!(c.validate().is_err());
        let mut c = CacheConfig::desk();
        c.l2.capacity_bytes = 128 * KB;
        assert!(c.validate().is_err());
        let mut c = CacheConfig::desk();
        c.prefetch.congestion_threshold = 0.0;
        assert!(c.validate().is_err());
        c.prefetch.congestion_threshold = 1.5;
        assert!(c.validate().is_err());
        let mut c = CacheConfig::desk();
        c.cores = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_roundtrip_and_hash() {
        let c = CacheConfig::desk();
        let text = c.to_toml_string();
        assert!(text.contains("line_bytes = 64"));
        let back = CacheConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.config_hash(), c.config_hash());
        assert_eq!(c.config_hash().len(), 16);
        assert_ne!(c.config_hash(), CacheConfig::sandy_bridge().config_hash());
        assert!(CacheConfig::from_toml_str("line_bytes = 64").is_err());
    }
}
