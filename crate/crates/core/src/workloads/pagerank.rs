//! PageRank with a fixed number of iterations:
//! `rank'(v) = (1 - d) + d * sum(rank(u) / outdeg(u))` over in-edges `u -> v`,
//! starting from rank 1 everywhere. Dangling vertices get a self-loop so the
//! rank sum stays `n`.
//!
//! FGL pushes contributions into a next-rank array under per-line locks.
//! DUP pulls from a read-only previous array into a current array and swaps
//! them each iteration. CCache pulls from a CData rank array that is only
//! read during the gather phase, then each core writes its own vertices'
//! new ranks back through `c_write`.

use std::rc::Rc;

use crate::config::SimConfig;
use crate::error::Result;
use crate::line::{f64_word, word_f64, LINE_BYTES, WORDS_PER_LINE};
use crate::merge::MergeSpec;
use crate::report::SimReport;
use crate::sched::{Cpu, Scheduler};
use crate::sim::Simulator;

use super::{close, finish, partition, workload_graph, Cadence, Graph, Layout, RunResult, Variant, WorkloadConfig};

/// Offsets, targets, two rank arrays and a degree array per vertex.
fn bytes_per_vertex(edge_factor: usize) -> u64 {
    8 * (edge_factor as u64 + 4)
}

pub fn oracle(g: &Graph, iterations: usize, damping: f64) -> Vec<f64> {
    let n = g.vertices();
    let t = g.transpose();
    let mut rank = vec![1.0; n];
    for _ in 0..iterations {
        let contrib: Vec<f64> = (0..n).map(|u| rank[u] / g.out_degree(u) as f64).collect();
        rank = (0..n)
            .map(|v| {
                let s: f64 = t.successors(v).iter().map(|&u| contrib[u as usize]).sum();
                (1.0 - damping) + damping * s
            })
            .collect();
    }
    rank
}

struct Shared {
    n: usize,
    cores: usize,
    iterations: usize,
    damping: f64,
    offsets: u64,
    edges: u64,
    degree: u64,
    rank: u64,
    next: u64,
    locks: u64,
}

fn word(base: u64, i: usize) -> u64 {
    base + i as u64 * 8
}

fn init_array(sim: &mut Simulator, base: u64, vals: impl IntoIterator<Item = u64>) -> Result<()> {
    for (i, v) in vals.into_iter().enumerate() {
        sim.init_word(word(base, i), v)?;
    }
    Ok(())
}

pub fn run(cfg: &SimConfig, wl: &WorkloadConfig) -> Result<SimReport> {
    let g = workload_graph(cfg, wl, bytes_per_vertex(wl.graph.edge_factor))?.with_dangling_self_loops();
    let n = g.vertices();
    let cores = cfg.cache.cores;
    // FGL walks out-edges, the pull variants walk in-edges.
    let walk = match wl.variant {
        Variant::Fgl => g.clone(),
        _ => g.transpose(),
    };
    let vbytes = (n * 8) as u64;

    let mut layout = Layout::new();
    let offsets = layout.alloc("offsets", vbytes + 8);
    let edges = layout.alloc("edges", (walk.edges() * 8) as u64);
    let degree = layout.alloc("degree", vbytes);
    let rank = match wl.variant {
        Variant::Ccache => layout.alloc_cdata("rank", vbytes),
        _ => layout.alloc("rank", vbytes),
    };
    let next = layout.alloc("next", vbytes);
    let locks = match wl.variant {
        Variant::Fgl => layout.alloc("locks", (n.div_ceil(WORDS_PER_LINE) * LINE_BYTES) as u64),
        _ => 0,
    };
    let mut sim = layout.build(cfg)?;
    init_array(&mut sim, offsets, walk.offsets.iter().copied())?;
    init_array(&mut sim, edges, walk.targets.iter().copied())?;
    init_array(&mut sim, degree, (0..n).map(|v| g.out_degree(v) as u64))?;
    init_array(&mut sim, rank, (0..n).map(|_| f64_word(1.0)))?;
    if wl.variant == Variant::Dup {
        init_array(&mut sim, next, (0..n).map(|_| f64_word(1.0)))?;
    }

    let shared = Rc::new(Shared {
        n,
        cores,
        iterations: wl.pagerank_iterations,
        damping: wl.damping,
        offsets,
        edges,
        degree,
        rank,
        next,
        locks,
    });
    let mut sched = Scheduler::new(sim);
    for core in 0..cores {
        let cpu = sched.cpu(core);
        let s = shared.clone();
        match wl.variant {
            Variant::Fgl => sched.spawn(core, push_fgl(cpu, s)),
            Variant::Dup => sched.spawn(core, pull_dup(cpu, s)),
            Variant::Ccache => sched.spawn(core, pull_ccache(cpu, s, Cadence::new(cfg, wl))),
        }
    }
    sched.run()?;

    // DUP's result lives in whichever array the last iteration wrote.
    let result = if wl.variant == Variant::Dup && wl.pagerank_iterations % 2 == 1 {
        next
    } else {
        rank
    };
    let want = oracle(&g, wl.pagerank_iterations, wl.damping);
    let mut pass = true;
    for (v, &w) in want.iter().enumerate() {
        if !close(word_f64(sched.sim().peek_word(word(result, v))?), w, 1e-6) {
            pass = false;
            break;
        }
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

async fn load_f(cpu: &Cpu, addr: u64) -> f64 {
    word_f64(cpu.load(addr).await)
}

async fn push_fgl(cpu: Cpu, s: Rc<Shared>) {
    let mine = partition(s.n, s.cores, cpu.id(), WORDS_PER_LINE);
    for _ in 0..s.iterations {
        for u in mine.clone() {
            let lo = cpu.load(word(s.offsets, u)).await;
            let hi = cpu.load(word(s.offsets, u + 1)).await;
            let r = load_f(&cpu, word(s.rank, u)).await;
            cpu.compute(2);
            let contrib = r / (hi - lo) as f64;
            for e in lo..hi {
                let v = cpu.load(word(s.edges, e as usize)).await as usize;
                let lock = s.locks + (v / WORDS_PER_LINE * LINE_BYTES) as u64;
                cpu.lock(lock).await;
                let x = load_f(&cpu, word(s.next, v)).await;
                cpu.store(word(s.next, v), f64_word(x + contrib)).await;
                cpu.unlock(lock).await;
            }
        }
        cpu.barrier().await;
        for v in mine.clone() {
            let x = load_f(&cpu, word(s.next, v)).await;
            cpu.compute(2);
            cpu.store(word(s.rank, v), f64_word((1.0 - s.damping) + s.damping * x))
                .await;
            cpu.store(word(s.next, v), 0).await;
        }
        cpu.barrier().await;
    }
}

async fn pull_dup(cpu: Cpu, s: Rc<Shared>) {
    let mine = partition(s.n, s.cores, cpu.id(), WORDS_PER_LINE);
    let (mut prev, mut cur) = (s.rank, s.next);
    for _ in 0..s.iterations {
        for v in mine.clone() {
            let lo = cpu.load(word(s.offsets, v)).await;
            let hi = cpu.load(word(s.offsets, v + 1)).await;
            let mut sum = 0.0;
            for e in lo..hi {
                let u = cpu.load(word(s.edges, e as usize)).await as usize;
                let r = load_f(&cpu, word(prev, u)).await;
                let d = cpu.load(word(s.degree, u)).await;
                cpu.compute(2);
                sum += r / d as f64;
            }
            cpu.compute(2);
            cpu.store(word(cur, v), f64_word((1.0 - s.damping) + s.damping * sum))
                .await;
        }
        cpu.barrier().await;
        std::mem::swap(&mut prev, &mut cur);
    }
}

async fn pull_ccache(cpu: Cpu, s: Rc<Shared>, mut cadence: Cadence) {
    let mine = partition(s.n, s.cores, cpu.id(), WORDS_PER_LINE);
    cpu.merge_init(MergeSpec::VecAddFloat, 0).await;
    for _ in 0..s.iterations {
        for v in mine.clone() {
            let lo = cpu.load(word(s.offsets, v)).await;
            let hi = cpu.load(word(s.offsets, v + 1)).await;
            let mut sum = 0.0;
            for e in lo..hi {
                let u = cpu.load(word(s.edges, e as usize)).await as usize;
                let a = word(s.rank, u);
                cadence.touch(&cpu, a).await;
                let r = word_f64(cpu.c_read(a, 0).await);
                cadence.count(&cpu, 1).await;
                let d = cpu.load(word(s.degree, u)).await;
                cpu.compute(2);
                sum += r / d as f64;
            }
            cpu.compute(2);
            cpu.store(word(s.next, v), f64_word((1.0 - s.damping) + s.damping * sum))
                .await;
        }
        cadence.boundary(&cpu).await;
        for v in mine.clone() {
            let x = cpu.load(word(s.next, v)).await;
            let a = word(s.rank, v);
            cadence.touch(&cpu, a).await;
            cpu.c_write(a, x, 0).await;
            cadence.count(&cpu, 1).await;
        }
        cadence.boundary(&cpu).await;
    }
}
