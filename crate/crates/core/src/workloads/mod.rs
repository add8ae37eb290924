//! Benchmarks in FGL, DUP and CCache variants, each checked against a serial
//! oracle.
//!
//! A workload lays out its shared data in simulated memory, spawns one
//! program per core on a [`Scheduler`], runs to completion and compares the
//! final shared state with a single-threaded replay of the same logical
//! updates.

pub mod bfs;
pub mod graph;
pub mod kmeans;
pub mod kv;
pub mod layout;
pub mod pagerank;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::line::line_of;
use crate::report::SimReport;
use crate::sched::{Cpu, Scheduler};

pub use graph::{Graph, GraphKind};
pub use layout::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WorkloadKind {
    Kv,
    Kmeans,
    Pagerank,
    Bfs,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 4] = [Self::Kv, Self::Kmeans, Self::Pagerank, Self::Bfs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kv => "kv",
            Self::Kmeans => "kmeans",
            Self::Pagerank => "pagerank",
            Self::Bfs => "bfs",
        }
    }
}

impl fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WorkloadKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown workload `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Fgl,
    Dup,
    Ccache,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Self::Fgl, Self::Dup, Self::Ccache];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fgl => "fgl",
            Self::Dup => "dup",
            Self::Ccache => "ccache",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub k: usize,
    /// 7 sums plus the count fill one accumulator line.
    pub dims: usize,
    pub iterations: usize,
    /// float64 points and accumulators instead of int64.
    pub float: bool,
    /// Overrides the point count derived from the working-set fraction.
    pub points: Option<usize>,
    /// Drop probability of an `approx_drop` accumulator merge (CCache only).
    pub drop_p: Option<f64>,
}

impl Default for KmeansParams {
    fn default() -> Self {
        Self {
            k: 8,
            dims: 7,
            iterations: 3,
            float: false,
            points: None,
            drop_p: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphParams {
    pub kind: GraphKind,
    /// log2 of the vertex count; derived from the working-set fraction when
    /// absent.
    pub scale: Option<u32>,
    pub edge_factor: usize,
    /// Load the graph from a CSR file instead of generating it.
    pub file: Option<std::path::PathBuf>,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self {
            kind: GraphKind::Kronecker,
            scale: None,
            edge_factor: 16,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub kind: WorkloadKind,
    pub variant: Variant,
    /// Input size as a fraction of LLC capacity.
    pub ws_fraction: f64,
    pub seed: u64,
    /// CData operations between cadence points. Default: 4 per source-buffer
    /// entry.
    pub merge_cadence: Option<usize>,
    /// Cadence points mark lines mergeable (`soft_merge`) instead of merging
    /// them immediately.
    pub soft_merge: bool,
    /// Capacity the working-set fraction refers to. Default: the simulated
    /// LLC, so an LLC override does not change the input.
    pub ws_base_bytes: Option<u64>,
    /// KV key count override.
    pub keys: Option<usize>,
    pub kmeans: KmeansParams,
    pub graph: GraphParams,
    pub pagerank_iterations: usize,
    pub damping: f64,
    /// BFS root. Default: the vertex with the most out-edges.
    pub bfs_source: Option<u64>,
}

impl WorkloadConfig {
    pub fn new(kind: WorkloadKind, variant: Variant) -> Self {
        Self {
            kind,
            variant,
            ws_fraction: 0.25,
            seed: 1,
            merge_cadence: None,
            soft_merge: true,
            ws_base_bytes: None,
            keys: None,
            kmeans: KmeansParams::default(),
            graph: GraphParams::default(),
            pagerank_iterations: 10,
            damping: 0.85,
            bfs_source: None,
        }
    }

    /// Working-set target in bytes.
    pub fn ws_bytes(&self, cfg: &SimConfig) -> u64 {
        let base = self.ws_base_bytes.unwrap_or(cfg.cache.llc.capacity_bytes as u64);
        (base as f64 * self.ws_fraction) as u64
    }

    pub fn cadence(&self, cfg: &SimConfig) -> usize {
        self.merge_cadence.unwrap_or(cfg.ccache.sb_entries * 4)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ws_fraction > 0.0 && self.ws_fraction.is_finite()) {
            return Err(SimError::Config(format!(
                "working-set fraction {} must be positive",
                self.ws_fraction
            )));
        }
        if self.merge_cadence == Some(0) {
            return Err(SimError::Config("merge cadence must be positive".into()));
        }
        Ok(())
    }
}

/// Run one workload on a fresh machine. Simulator errors are recorded in the
/// report rather than returned.
pub fn run_workload(cfg: &SimConfig, wl: &WorkloadConfig) -> SimReport {
    let result = cfg.validate().and_then(|_| wl.validate()).and_then(|_| match wl.kind {
        WorkloadKind::Kv => kv::run(cfg, wl),
        WorkloadKind::Kmeans => kmeans::run(cfg, wl),
        WorkloadKind::Pagerank => pagerank::run(cfg, wl),
        WorkloadKind::Bfs => bfs::run(cfg, wl),
    });
    result.unwrap_or_else(|e| {
        let mut r = SimReport::failed(wl.kind.name(), wl.variant.name(), &e);
        echo_config(&mut r, cfg, wl);
        r
    })
}

fn echo_config(r: &mut SimReport, cfg: &SimConfig, wl: &WorkloadConfig) {
    r.cores = cfg.cache.cores;
    r.ws_fraction = wl.ws_fraction;
    r.seed = wl.seed;
    r.llc_bytes = cfg.cache.llc.capacity_bytes as u64;
    r.l1_bytes = cfg.cache.l1.capacity_bytes as u64;
    r.sb_entries = cfg.ccache.sb_entries;
    r.merge_cadence = wl.cadence(cfg);
    r.soft_merge = wl.soft_merge;
    r.dirty_merge = cfg.ccache.dirty_merge;
}

/// Outcome of a finished run handed to [`finish`].
pub(crate) struct RunResult {
    pub peak_bytes: u64,
    pub oracle_pass: Option<bool>,
    pub quality: Option<f64>,
}

pub(crate) fn finish(sched: &Scheduler, cfg: &SimConfig, wl: &WorkloadConfig, res: RunResult) -> SimReport {
    let sim = sched.sim();
    let mut r = SimReport {
        workload: wl.kind.name().to_string(),
        variant: wl.variant.name().to_string(),
        cores: 0,
        ws_fraction: 0.0,
        seed: 0,
        llc_bytes: 0,
        l1_bytes: 0,
        sb_entries: 0,
        merge_cadence: 0,
        soft_merge: false,
        dirty_merge: false,
        core_cycles: sched.clocks().iter().map(|c| c.total).collect(),
        max_cycles: sched.max_cycles(),
        counters: sim.counters().clone(),
        peak_bytes: res.peak_bytes,
        dropped_merges: sim.dropped_merges(),
        oracle_pass: res.oracle_pass,
        quality: res.quality,
        error: None,
    };
    echo_config(&mut r, cfg, wl);
    r
}

/// The input graph of a graph workload: loaded from a file, or generated
/// at the configured scale, or at the scale whose footprint of
/// `bytes_per_vertex` per vertex best matches the working-set target.
pub fn workload_graph(cfg: &SimConfig, wl: &WorkloadConfig, bytes_per_vertex: u64) -> Result<Graph> {
    let g = &wl.graph;
    if let Some(path) = &g.file {
        return Graph::load(path);
    }
    let scale = g.scale.unwrap_or_else(|| {
        let v = (wl.ws_bytes(cfg) as f64 / bytes_per_vertex as f64).max(1.0);
        (v.log2().round() as u32).clamp(2, 24)
    });
    graph::gen_graph(g.kind, scale, g.edge_factor, wl.seed)
}

/// Independent deterministic random stream `stream` for `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Contiguous share of `0..n` for `core`, with boundaries rounded to
/// multiples of `align`.
pub fn partition(n: usize, cores: usize, core: usize, align: usize) -> Range<usize> {
    let chunks = n.div_ceil(align);
    let lo = chunks * core / cores;
    let hi = chunks * (core + 1) / cores;
    (lo * align).min(n)..(hi * align).min(n)
}

/// Relative comparison used for floating-point oracles.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Issues cadence points for a core's CData accesses.
///
/// A cadence point runs every `every` COps. One is also issued early before
/// the core would hold more than `max_lines` distinct CData lines since the
/// previous point, which keeps every L1 set within its w-1 budget and leaves
/// the source buffer a mergeable entry to flush.
pub struct Cadence {
    every: usize,
    max_lines: usize,
    soft: bool,
    ops: usize,
    lines: Vec<u64>,
}

impl Cadence {
    pub fn new(cfg: &SimConfig, wl: &WorkloadConfig) -> Self {
        Self {
            every: wl.cadence(cfg),
            max_lines: cfg.ccache.sb_entries.min(cfg.cache.l1.ways - 1).max(1),
            soft: wl.soft_merge,
            ops: 0,
            lines: Vec::new(),
        }
    }

    /// Call before a COp on `addr`.
    pub async fn touch(&mut self, cpu: &Cpu, addr: u64) {
        let line = line_of(addr);
        if !self.lines.contains(&line) {
            if self.lines.len() >= self.max_lines {
                self.point(cpu).await;
            }
            self.lines.push(line);
        }
    }

    /// Call after `n` COps.
    pub async fn count(&mut self, cpu: &Cpu, n: usize) {
        self.ops += n;
        if self.ops >= self.every {
            self.point(cpu).await;
        }
    }

    async fn point(&mut self, cpu: &Cpu) {
        if self.soft {
            cpu.soft_merge().await;
        } else {
            cpu.merge().await;
        }
        self.ops = 0;
        self.lines.clear();
    }

    /// Merge boundary: merge everything now, then wait for all cores.
    pub async fn boundary(&mut self, cpu: &Cpu) {
        cpu.merge().await;
        self.ops = 0;
        self.lines.clear();
        cpu.barrier().await;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_cover_range() {
        for (n, cores, align) in [(100, 4, 1), (1000, 3, 64), (10, 4, 8), (0, 2, 1)] {
            let mut next = 0;
            for c in 0..cores {
                let r = partition(n, cores, c, align);
                assert_eq!(r.start, next);
                if r.start < n && r.end < n {
                    assert_eq!(r.end % align, 0);
                }
                next = r.end;
            }
            assert_eq!(next, n);
        }
    }

    #[test]
    fn names_round_trip() {
        for k in WorkloadKind::ALL {
            assert_eq!(k.name().parse::<WorkloadKind>().unwrap(), k);
        }
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
    }
}
