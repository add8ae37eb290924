//! Level-synchronous breadth-first search over a reached-vertex bitmap.
//!
//! Each level has an expand phase, in which cores walk their frontier and
//! set the bits of successors, and a collect phase, in which every core scans
//! its slice of the bitmap for newly set bits, assigns their levels and
//! builds its next frontier. FGL sets bits under per-line locks; DUP appends
//! successors to thread-local lists that cores apply to their own bitmap
//! slices afterwards; CCache sets bits with `c_write` and merges with
//! `or_merge`.

use std::cell::Cell;
use std::rc::Rc;

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::line::{LINE_BYTES, WORDS_PER_LINE};
use crate::merge::MergeSpec;
use crate::report::SimReport;
use crate::sched::{Cpu, Scheduler};

use super::{finish, partition, workload_graph, Cadence, Graph, Layout, RunResult, Variant, WorkloadConfig};

pub const UNREACHED: u64 = u64::MAX;

/// Offsets, edges, level, frontier and bitmap bookkeeping per vertex.
fn bytes_per_vertex(edge_factor: usize) -> u64 {
    8 * (edge_factor as u64 + 3)
}

/// Serial BFS: level of every vertex, `UNREACHED` if none.
pub fn oracle(g: &Graph, source: usize) -> Vec<u64> {
    let mut level = vec![UNREACHED; g.vertices()];
    level[source] = 0;
    let mut frontier = vec![source];
    let mut l = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in g.successors(u) {
                if level[v as usize] == UNREACHED {
                    level[v as usize] = l + 1;
                    next.push(v as usize);
                }
            }
        }
        frontier = next;
        l += 1;
    }
    level
}

/// Reached-vertex bitmap of a level array.
pub fn bitmap_of(levels: &[u64]) -> Vec<u64> {
    let mut words = vec![0u64; levels.len().div_ceil(64)];
    for (v, &l) in levels.iter().enumerate() {
        if l != UNREACHED {
            words[v / 64] |= 1 << (v % 64);
        }
    }
    words
}

struct Shared {
    cores: usize,
    words: usize,
    n: usize,
    source: usize,
    offsets: u64,
    edges: u64,
    bitmap: u64,
    prev: u64,
    levels: u64,
    flags: u64,
    locks: u64,
    frontiers: Vec<u64>,
    lists: Vec<(u64, Rc<Cell<u64>>)>,
    list_lens: u64,
}

fn word(base: u64, i: usize) -> u64 {
    base + i as u64 * 8
}

impl Shared {
    /// Bitmap words scanned by `core`; line aligned.
    fn word_range(&self, core: usize) -> std::ops::Range<usize> {
        partition(self.words, self.cores, core, WORDS_PER_LINE)
    }

    fn owns(&self, core: usize, v: usize) -> bool {
        self.word_range(core).contains(&(v / 64))
    }

    fn flag(&self, level: u64) -> u64 {
        self.flags + (level % 2) * LINE_BYTES as u64
    }
}

pub fn run(cfg: &SimConfig, wl: &WorkloadConfig) -> Result<SimReport> {
    let g = workload_graph(cfg, wl, bytes_per_vertex(wl.graph.edge_factor))?;
    run_on_graph(cfg, wl, &g)
}

pub fn run_on_graph(cfg: &SimConfig, wl: &WorkloadConfig, g: &Graph) -> Result<SimReport> {
    let n = g.vertices();
    let source = match wl.bfs_source {
        Some(s) => s as usize,
        None => (0..n)
            .max_by_key(|&v| (g.out_degree(v), std::cmp::Reverse(v)))
            .unwrap_or(0),
    };
    if source >= n {
        return Err(SimError::Config(format!(
            "BFS source {source} is not a vertex of a {n}-vertex graph"
        )));
    }
    let cores = cfg.cache.cores;
    let words = n.div_ceil(64);

    let mut layout = Layout::new();
    let offsets = layout.alloc("offsets", (n as u64 + 1) * 8);
    let edges = layout.alloc("edges", (g.edges() * 8) as u64);
    let bitmap = match wl.variant {
        Variant::Ccache => layout.alloc_cdata("bitmap", words as u64 * 8),
        _ => layout.alloc("bitmap", words as u64 * 8),
    };
    let prev = layout.alloc("prev", words as u64 * 8);
    let levels = layout.alloc("levels", n as u64 * 8);
    let flags = layout.alloc("flags", 2 * LINE_BYTES as u64);
    let mut shared = Shared {
        cores,
        words,
        n,
        source,
        offsets,
        edges,
        bitmap,
        prev,
        levels,
        flags,
        locks: 0,
        frontiers: Vec::new(),
        lists: Vec::new(),
        list_lens: 0,
    };
    for c in 0..cores {
        let r = shared.word_range(c);
        let cap = ((r.end * 64).min(n).saturating_sub(r.start * 64)) as u64 * 8;
        shared.frontiers.push(layout.alloc(&format!("frontier.{c}"), cap));
    }
    match wl.variant {
        Variant::Fgl => {
            shared.locks = layout.alloc("locks", (words.div_ceil(WORDS_PER_LINE) * LINE_BYTES) as u64);
        }
        Variant::Dup => {
            for c in 0..cores {
                shared
                    .lists
                    .push(layout.alloc_dynamic(&format!("list.{c}"), g.edges() as u64 * 8));
            }
            shared.list_lens = layout.alloc("list_lens", (cores * LINE_BYTES) as u64);
        }
        Variant::Ccache => {}
    }

    let mut sim = layout.build(cfg)?;
    for (i, &o) in g.offsets.iter().enumerate() {
        sim.init_word(word(offsets, i), o)?;
    }
    for (i, &t) in g.targets.iter().enumerate() {
        sim.init_word(word(edges, i), t)?;
    }
    for v in 0..n {
        sim.init_word(word(levels, v), if v == source { 0 } else { UNREACHED })?;
    }
    let src_bit = 1u64 << (source % 64);
    sim.init_word(word(bitmap, source / 64), src_bit)?;
    sim.init_word(word(prev, source / 64), src_bit)?;

    let shared = Rc::new(shared);
    let mut sched = Scheduler::new(sim);
    for core in 0..cores {
        let cpu = sched.cpu(core);
        sched.spawn(core, program(cpu, shared.clone(), wl.variant, Cadence::new(cfg, wl)));
    }
    sched.run()?;

    let want = oracle(g, source);
    let want_bits = bitmap_of(&want);
    let sim = sched.sim();
    let mut pass = true;
    for (i, &w) in want_bits.iter().enumerate() {
        pass &= sim.peek_word(word(bitmap, i))? == w;
    }
    for (v, &l) in want.iter().enumerate() {
        pass &= sim.peek_word(word(levels, v))? == l;
    }
    Ok(finish(
        &sched,
        cfg,
        wl,
        RunResult {
            peak_bytes: layout.peak_bytes(),
            oracle_pass: Some(pass),
            quality: None,
        },
    ))
}

async fn program(cpu: Cpu, s: Rc<Shared>, variant: Variant, mut cadence: Cadence) {
    let core = cpu.id();
    let frontier = s.frontiers[core];
    if variant == Variant::Ccache {
        cpu.merge_init(MergeSpec::OrMerge, 0).await;
    }
    let mut len = 0usize;
    if s.owns(core, s.source) {
        cpu.store(frontier, s.source as u64).await;
        len = 1;
    }
    let mut level = 0u64;
    loop {
        // Expand.
        let mut appended = 0usize;
        for i in 0..len {
            let u = cpu.load(word(frontier, i)).await as usize;
            let lo = cpu.load(word(s.offsets, u)).await;
            let hi = cpu.load(word(s.offsets, u + 1)).await;
            for e in lo..hi {
                let v = cpu.load(word(s.edges, e as usize)).await as usize;
                let addr = word(s.bitmap, v / 64);
                let bit = 1u64 << (v % 64);
                cpu.compute(2);
                match variant {
                    Variant::Fgl => {
                        if cpu.load(addr).await & bit == 0 {
                            let lock = s.locks + (v / 64 / WORDS_PER_LINE * LINE_BYTES) as u64;
                            cpu.lock(lock).await;
                            let w = cpu.load(addr).await;
                            cpu.store(addr, w | bit).await;
                            cpu.unlock(lock).await;
                        }
                    }
                    Variant::Dup => {
                        if cpu.load(addr).await & bit == 0 {
                            let (list, used) = &s.lists[core];
                            cpu.store(word(*list, appended), v as u64).await;
                            appended += 1;
                            used.set(used.get().max(appended as u64 * 8));
                        }
                    }
                    Variant::Ccache => {
                        cadence.touch(&cpu, addr).await;
                        let w = cpu.c_read(addr, 0).await;
                        if w & bit == 0 {
                            cpu.c_write(addr, w | bit, 0).await;
                            cadence.count(&cpu, 2).await;
                        } else {
                            cadence.count(&cpu, 1).await;
                        }
                    }
                }
            }
        }
        match variant {
            Variant::Ccache => cadence.boundary(&cpu).await,
            Variant::Fgl => cpu.barrier().await,
            Variant::Dup => {
                cpu.store(s.list_lens + (core * LINE_BYTES) as u64, appended as u64)
                    .await;
                cpu.barrier().await;
                // Apply every core's list to the bitmap words this core owns.
                for (j, (list, _)) in s.lists.iter().enumerate() {
                    let n = cpu.load(s.list_lens + (j * LINE_BYTES) as u64).await as usize;
                    for i in 0..n {
                        let v = cpu.load(word(*list, i)).await as usize;
                        cpu.compute(2);
                        if s.owns(core, v) {
                            let addr = word(s.bitmap, v / 64);
                            let w = cpu.load(addr).await;
                            cpu.store(addr, w | 1 << (v % 64)).await;
                        }
                    }
                }
                cpu.barrier().await;
            }
        }

        // Collect.
        len = 0;
        for wi in s.word_range(core) {
            let addr = word(s.bitmap, wi);
            let w = if variant == Variant::Ccache {
                cadence.touch(&cpu, addr).await;
                let w = cpu.c_read(addr, 0).await;
                cadence.count(&cpu, 1).await;
                w
            } else {
                cpu.load(addr).await
            };
            let p = cpu.load(word(s.prev, wi)).await;
            cpu.compute(2);
            let mut fresh = w & !p;
            if fresh == 0 {
                continue;
            }
            while fresh != 0 {
                let v = wi * 64 + fresh.trailing_zeros() as usize;
                fresh &= fresh - 1;
                cpu.compute(2);
                debug_assert!(v < s.n);
                cpu.store(word(s.levels, v), level + 1).await;
                cpu.store(word(frontier, len), v as u64).await;
                len += 1;
            }
            cpu.store(word(s.prev, wi), w).await;
        }
        if variant == Variant::Ccache {
            cpu.merge().await;
        }
        if len > 0 {
            cpu.store(s.flag(level), 1).await;
        }
        if core == 0 {
            cpu.store(s.flag(level + 1), 0).await;
        }
        cpu.barrier().await;
        if cpu.load(s.flag(level)).await == 0 {
            break;
        }
        level += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::{run_workload, GraphKind, WorkloadKind};

    fn on_graph(variant: Variant, g: &Graph, source: u64) -> SimReport {
        let mut wl = WorkloadConfig::new(WorkloadKind::Bfs, variant);
        wl.bfs_source = Some(source);
        run_on_graph(&SimConfig::scaled(), &wl, g).unwrap()
    }

    #[test]
    fn star_from_center() {
        let edges: Vec<(u64, u64)> = (1..100).map(|v| (0, v)).collect();
        let g = Graph::from_edges(100, &edges);
        let levels = oracle(&g, 0);
        assert!(levels[1..].iter().all(|&l| l == 1));
        for v in Variant::ALL {
            assert!(on_graph(v, &g, 0).passed(), "{v}");
        }
    }

    #[test]
    fn path_levels_are_distances() {
        let edges: Vec<(u64, u64)> = (0..199).map(|v| (v, v + 1)).collect();
        let g = Graph::from_edges(200, &edges);
        let levels = oracle(&g, 0);
        assert!(levels.iter().enumerate().all(|(v, &l)| l == v as u64));
        for v in Variant::ALL {
            assert!(on_graph(v, &g, 0).passed(), "{v}");
        }
    }

    #[test]
    fn disconnected_vertex_stays_unset() {
        let g = Graph::from_edges(70, &[(0, 1), (1, 2), (2, 0), (3, 69)]);
        let levels = oracle(&g, 0);
        assert_eq!(levels[69], UNREACHED);
        assert_eq!(bitmap_of(&levels), vec![0b111, 0]);
        for v in Variant::ALL {
            assert!(on_graph(v, &g, 0).passed(), "{v}");
        }
    }

    #[test]
    fn kronecker_matches_oracle() {
        for v in Variant::ALL {
            let mut wl = WorkloadConfig::new(WorkloadKind::Bfs, v);
            wl.graph.kind = GraphKind::Kronecker;
            wl.graph.scale = Some(10);
            wl.seed = 3;
            let r = run_workload(&SimConfig::scaled(), &wl);
            assert!(r.passed(), "{v}: {r:?}");
            assert_eq!(r.counters.cdata_directory_messages, 0);
            // The default root reaches a large part of the graph.
            assert!(r.counters.stores > 300, "{v}: {}", r.counters.stores);
        }
    }
}
