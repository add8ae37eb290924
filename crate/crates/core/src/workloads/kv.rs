//! Key-value store: cores increment the values of uniformly random keys,
//! 16 increments per key in total. Values are int64, 8 per line.

use rand::Rng;

use crate::config::SimConfig;
use crate::error::Result;
use crate::line::{LINE_BYTES, WORDS_PER_LINE};
use crate::merge::MergeSpec;
use crate::report::SimReport;
use crate::sched::Scheduler;

use super::{finish, partition, rng_for, Cadence, Layout, RunResult, Variant, WorkloadConfig};

pub const INCREMENTS_PER_KEY: usize = 16;
/// Instructions spent generating a key and forming its address.
const KEY_INSTRS: u64 = 4;

pub fn key_count(cfg: &SimConfig, wl: &WorkloadConfig) -> usize {
    wl.keys.unwrap_or((wl.ws_bytes(cfg) / 8) as usize).max(cfg.cache.cores)
}

/// Increments issued by `core`.
fn share(total: usize, cores: usize, core: usize) -> usize {
    total / cores + usize::from(core < total % cores)
}

/// The keys `core` increments, in program order.
pub fn key_stream(seed: u64, core: usize, keys: usize, increments: usize) -> impl Iterator<Item = usize> {
    let mut rng = rng_for(seed, core as u64);
    (0..increments).map(move |_| rng.gen_range(0..keys))
}

/// Final value of every key: how often it was incremented.
pub fn oracle(seed: u64, cores: usize, keys: usize) -> Vec<u64> {
    let total = keys * INCREMENTS_PER_KEY;
    let mut counts = vec![0u64; keys];
    for core in 0..cores {
        for k in key_stream(seed, core, keys, share(total, cores, core)) {
            counts[k] += 1;
        }
    }
    counts
}

pub fn run(cfg: &SimConfig, wl: &WorkloadConfig) -> Result<SimReport> {
    let cores = cfg.cache.cores;
    let keys = key_count(cfg, wl);
    let total = keys * INCREMENTS_PER_KEY;
    let value_bytes = (keys * 8) as u64;
    let lines = keys.div_ceil(WORDS_PER_LINE);

    let mut layout = Layout::new();
    let (result, copies, locks) = match wl.variant {
        Variant::Fgl => {
            let vals = layout.alloc("values", value_bytes);
            let locks = layout.alloc("locks", (lines * LINE_BYTES) as u64);
            (vals, vec![vals], locks)
        }
        Variant::Dup => {
            let copies: Vec<u64> = (0..cores)
                .map(|c| layout.alloc(&format!("values.{c}"), value_bytes))
                .collect();
            (copies[0], copies, 0)
        }
        Variant::Ccache => {
            let vals = layout.alloc_cdata("values", value_bytes);
            (vals, vec![vals], 0)
        }
    };
    let mut sched = Scheduler::new(layout.build(cfg)?);

    for core in 0..cores {
        let cpu = sched.cpu(core);
        let keys_iter = key_stream(wl.seed, core, keys, share(total, cores, core));
        match wl.variant {
            Variant::Fgl => {
                let vals = result;
                sched.spawn(core, async move {
                    for key in keys_iter {
                        cpu.compute(KEY_INSTRS);
                        let addr = vals + key as u64 * 8;
                        let lock = locks + (key / WORDS_PER_LINE * LINE_BYTES) as u64;
                        cpu.lock(lock).await;
                        let v = cpu.load(addr).await;
                        cpu.store(addr, v + 1).await;
                        cpu.unlock(lock).await;
                    }
                });
            }
            Variant::Dup => {
                let copies = copies.clone();
                sched.spawn(core, async move {
                    let mine = copies[core];
                    for key in keys_iter {
                        cpu.compute(KEY_INSTRS);
                        let addr = mine + key as u64 * 8;
                        let v = cpu.load(addr).await;
                        cpu.store(addr, v + 1).await;
                    }
                    cpu.barrier().await;
                    // Reduce every copy into copy 0, partitioned by line.
                    for key in partition(keys, cores, core, WORDS_PER_LINE) {
                        let off = key as u64 * 8;
                        let mut sum = 0;
                        for &copy in &copies[1..] {
                            sum += cpu.load(copy + off).await;
                            cpu.compute(1);
                        }
                        let v = cpu.load(copies[0] + off).await;
                        cpu.store(copies[0] + off, v + sum).await;
                    }
                });
            }
            Variant::Ccache => {
                let vals = result;
                let mut cadence = Cadence::new(cfg, wl);
                sched.spawn(core, async move {
                    cpu.merge_init(MergeSpec::AddDiff, 0).await;
                    for key in keys_iter {
                        cpu.compute(KEY_INSTRS);
                        let addr = vals + key as u64 * 8;
                        cadence.touch(&cpu, addr).await;
                        let v = cpu.c_read(addr, 0).await;
                        cpu.c_write(addr, v + 1, 0).await;
                        cadence.count(&cpu, 2).await;
                    }
                    cadence.boundary(&cpu).await;
                });
            }
        }
    }
    sched.run()?;

    let expect = oracle(wl.seed, cores, keys);
    let mut pass = true;
    for (k, &want) in expect.iter().enumerate() {
        if sched.sim().peek_word(result + k as u64 * 8)? != want {
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
