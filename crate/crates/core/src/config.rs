//! Simulated machine parameters.
//!
//! Defaults reproduce the evaluated 8-core machine: 32KB/8-way L1 (4 cycles),
//! 512KB/8-way L2 (10 cycles), 4MB/16-way shared LLC (70 cycles), 300-cycle
//! memory, an 8-entry source buffer (3 cycles) and a 170-cycle merge.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::line::LINE_BYTES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    L1,
    L2,
    Llc,
    Memory,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::L1 => "L1",
            Level::L2 => "L2",
            Level::Llc => "LLC",
            Level::Memory => "Memory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub ways: usize,
    pub capacity_bytes: usize,
    pub line_bytes: usize,
    pub hit_latency: u64,
}

impl LevelConfig {
    pub const fn new(ways: usize, capacity_bytes: usize, hit_latency: u64) -> Self {
        Self {
            ways,
            capacity_bytes,
            line_bytes: LINE_BYTES,
            hit_latency,
        }
    }

    pub fn sets(&self) -> usize {
        self.capacity_bytes / (self.ways * self.line_bytes)
    }

    fn validate(&self, level: Level) -> Result<()> {
        let name = level.name();
        if self.line_bytes != LINE_BYTES {
            return Err(SimError::Config(format!(
                "{name}: line size must be {LINE_BYTES} bytes"
            )));
        }
        if self.ways == 0 || self.capacity_bytes == 0 {
            return Err(SimError::Config(format!("{name}: empty cache")));
        }
        if !self.capacity_bytes.is_multiple_of(self.ways * self.line_bytes) {
            return Err(SimError::Config(format!(
                "{name}: capacity {} is not a multiple of ways x line size",
                self.capacity_bytes
            )));
        }
        if !self.sets().is_power_of_two() {
            return Err(SimError::Config(format!(
                "{name}: set count {} is not a power of two",
                self.sets()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub l1: LevelConfig,
    pub l2: LevelConfig,
    pub llc: LevelConfig,
    pub memory_latency: u64,
    pub cores: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            l1: LevelConfig::new(8, 32 * 1024, 4),
            l2: LevelConfig::new(8, 512 * 1024, 10),
            llc: LevelConfig::new(16, 4 * 1024 * 1024, 70),
            memory_latency: 300,
            cores: 8,
        }
    }
}

impl CacheConfig {
    /// Desk-scale machine used by the acceptance runs: 4 cores, 8KB L1,
    /// 64KB L2, 256KB LLC. Latencies and associativities are unchanged.
    pub fn scaled() -> Self {
        Self {
            l1: LevelConfig::new(8, 8 * 1024, 4),
            l2: LevelConfig::new(8, 64 * 1024, 10),
            llc: LevelConfig::new(16, 256 * 1024, 70),
            memory_latency: 300,
            cores: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.l1.validate(Level::L1)?;
        self.l2.validate(Level::L2)?;
        self.llc.validate(Level::Llc)?;
        if self.cores == 0 || self.cores > 64 {
            return Err(SimError::Config(format!("core count {} outside 1..=64", self.cores)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CCacheConfig {
    pub sb_entries: usize,
    pub sb_hit_latency: u64,
    /// Fixed cost of merging one line, including the LLC round trip.
    pub merge_overhead: u64,
    /// Cost of one `rd_mreg`/`wr_mreg`.
    pub mreg_access: u64,
    /// Skip merging lines that were never written.
    pub dirty_merge: bool,
}

impl Default for CCacheConfig {
    fn default() -> Self {
        Self {
            sb_entries: 8,
            sb_hit_latency: 3,
            merge_overhead: 170,
            mreg_access: 1,
            dirty_merge: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cache: CacheConfig,
    pub ccache: CCacheConfig,
}

impl SimConfig {
    pub fn scaled() -> Self {
        Self {
            cache: CacheConfig::scaled(),
            ccache: CCacheConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cache.validate()?;
        if self.ccache.sb_entries == 0 {
            return Err(SimError::Config("source buffer needs at least one entry".into()));
        }
        Ok(())
    }
}

/// Flat `key = value` configuration file. Every field is optional and
/// overrides the corresponding default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub cores: Option<usize>,
    pub memory_latency: Option<u64>,
    pub l1_ways: Option<usize>,
    pub l1_bytes: Option<usize>,
    pub l1_latency: Option<u64>,
    pub l2_ways: Option<usize>,
    pub l2_bytes: Option<usize>,
    pub l2_latency: Option<u64>,
    pub llc_ways: Option<usize>,
    pub llc_bytes: Option<usize>,
    pub llc_latency: Option<u64>,
    pub line_bytes: Option<usize>,
    pub sb_entries: Option<usize>,
    pub sb_latency: Option<u64>,
    pub merge_overhead: Option<u64>,
    pub mreg_access: Option<u64>,
    pub dirty_merge: Option<bool>,

    pub workload: Option<String>,
    pub variant: Option<String>,
    pub ws_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub merge_cadence: Option<usize>,
    pub soft_merge: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn apply(&self, cfg: &mut SimConfig) {
        let c = &mut cfg.cache;
        macro_rules! set {
            ($src:ident => $dst:expr) => {
                if let Some(v) = self.$src {
                    $dst = v;
                }
            };
        }
        set!(cores => c.cores);
        set!(memory_latency => c.memory_latency);
        set!(l1_ways => c.l1.ways);
        set!(l1_bytes => c.l1.capacity_bytes);
        set!(l1_latency => c.l1.hit_latency);
        set!(l2_ways => c.l2.ways);
        set!(l2_bytes => c.l2.capacity_bytes);
        set!(l2_latency => c.l2.hit_latency);
        set!(llc_ways => c.llc.ways);
        set!(llc_bytes => c.llc.capacity_bytes);
        set!(llc_latency => c.llc.hit_latency);
        if let Some(v) = self.line_bytes {
            c.l1.line_bytes = v;
            c.l2.line_bytes = v;
            c.llc.line_bytes = v;
        }
        let cc = &mut cfg.ccache;
        set!(sb_entries => cc.sb_entries);
        set!(sb_latency => cc.sb_hit_latency);
        set!(merge_overhead => cc.merge_overhead);
        set!(mreg_access => cc.mreg_access);
        set!(dirty_merge => cc.dirty_merge);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_simulated_machine() {
        let c = CacheConfig::default();
        assert_eq!((c.l1.ways, c.l1.capacity_bytes, c.l1.hit_latency), (8, 32768, 4));
        assert_eq!((c.l2.ways, c.l2.capacity_bytes, c.l2.hit_latency), (8, 524288, 10));
        assert_eq!((c.llc.ways, c.llc.capacity_bytes, c.llc.hit_latency), (16, 4 << 20, 70));
        assert_eq!(c.memory_latency, 300);
        assert_eq!(c.cores, 8);
        let cc = CCacheConfig::default();
        assert_eq!(cc.sb_entries * LINE_BYTES, 512);
        assert_eq!(cc.sb_hit_latency, 3);
        assert_eq!(cc.merge_overhead, 170);
        assert_eq!(c.l1.sets(), 64);
        c.validate().unwrap();
        CacheConfig::scaled().validate().unwrap();
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut c = CacheConfig::default();
        c.l1.capacity_bytes = 3 * 8 * 64;
        assert!(c.validate().is_err());
        let mut c = CacheConfig::default();
        c.l2.capacity_bytes = 1000;
        assert!(c.validate().is_err());
        let mut c = CacheConfig::default();
        c.llc.line_bytes = 32;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_file_overrides_defaults() {
        let f = ConfigFile::parse("cores = 4\nllc_bytes = 2097152\nsb_entries = 16\ndirty_merge = false\n").unwrap();
        let mut cfg = SimConfig::default();
        f.apply(&mut cfg);
        assert_eq!(cfg.cache.cores, 4);
        assert_eq!(cfg.cache.llc.capacity_bytes, 2 << 20);
        assert_eq!(cfg.ccache.sb_entries, 16);
        assert!(!cfg.ccache.dirty_merge);
        assert_eq!(cfg.cache.l1, CacheConfig::default().l1);
        assert!(ConfigFile::parse("bogus = 1").is_err());
    }
}
