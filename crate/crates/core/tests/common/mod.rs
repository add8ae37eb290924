//! Randomized checks of the coherent hierarchy and the CData machinery
//! against a flat shadow memory.

use std::collections::{HashMap, HashSet};

use ccache_sim::line::LINE_BYTES;
use ccache_sim::{LevelConfig, MergeSpec, SimConfig, SimError, Simulator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORES: usize = 4;
const COHERENT_BYTES: u64 = 16 << 10;
const CDATA_BASE: u64 = COHERENT_BYTES;
const CDATA_BYTES: u64 = 4 << 10;

/// Tiny caches so that every level evicts constantly.
fn tiny() -> Simulator {
    let mut cfg = SimConfig::default();
    cfg.cache.cores = CORES;
    cfg.cache.l1 = LevelConfig::new(2, 512, 4);
    cfg.cache.l2 = LevelConfig::new(2, 1024, 10);
    cfg.cache.llc = LevelConfig::new(4, 4096, 70);
    cfg.ccache.sb_entries = 4;
    let mut s = Simulator::new(cfg, (COHERENT_BYTES + CDATA_BYTES) as usize).unwrap();
    s.declare_cdata(CDATA_BASE, CDATA_BYTES).unwrap();
    for c in 0..CORES {
        s.merge_init(c, &MergeSpec::AddDiff, 0).unwrap();
    }
    s
}

fn word_addr(rng: &mut ChaCha8Rng, base: u64, bytes: u64) -> u64 {
    base + rng.gen_range(0..bytes / 8) * 8
}

/// `c_read` + `c_write`, merging first when the core is out of space.
/// Returns whether it had to merge.
fn c_add(s: &mut Simulator, core: usize, addr: u64, delta: u64) -> bool {
    let (cur, merged) = match s.c_read(core, addr, 0) {
        Ok(r) => (r.value, false),
        Err(SimError::SourceBufferFull { .. } | SimError::SetPinned { .. }) => {
            s.merge(core).unwrap();
            (s.c_read(core, addr, 0).unwrap().value, true)
        }
        Err(e) => panic!("{e}"),
    };
    s.c_write(core, addr, cur.wrapping_add(delta), 0).unwrap();
    merged
}

/// Coherent access that unpins a fully pinned set by marking the core's CData
/// lines mergeable.
fn coherent(
    s: &mut Simulator,
    pinned: &mut [HashSet<u64>],
    core: usize,
    mut op: impl FnMut(&mut Simulator) -> Result<u64, SimError>,
) -> u64 {
    match op(s) {
        Ok(v) => v,
        Err(SimError::SetPinned { .. }) => {
            s.soft_merge(core);
            pinned[core].clear();
            op(s).unwrap()
        }
        Err(e) => panic!("{e}"),
    }
}

pub fn fuzz(seed: u64, steps: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = tiny();
    let mut shadow: HashMap<u64, u64> = HashMap::new();
    let mut cdata_sum: HashMap<u64, u64> = HashMap::new();
    // Lines each core privatized since its last soft_merge/merge.
    let mut pinned: Vec<HashSet<u64>> = vec![HashSet::new(); CORES];
    for step in 0..steps {
        let core = rng.gen_range(0..CORES);
        match rng.gen_range(0..10) {
            0..=3 => {
                let a = word_addr(&mut rng, 0, COHERENT_BYTES);
                let v = coherent(&mut s, &mut pinned, core, |s| s.load(core, a).map(|r| r.value));
                assert_eq!(v, shadow.get(&a).copied().unwrap_or(0), "step {step}: load {a:#x}");
            }
            4..=6 => {
                let a = word_addr(&mut rng, 0, COHERENT_BYTES);
                let v = rng.gen();
                coherent(&mut s, &mut pinned, core, |s| s.store(core, a, v).map(|r| r.value));
                shadow.insert(a, v);
            }
            7 | 8 => {
                let a = word_addr(&mut rng, CDATA_BASE, CDATA_BYTES);
                let d = rng.gen_range(1..100);
                if c_add(&mut s, core, a, d) {
                    pinned[core].clear();
                }
                *cdata_sum.entry(a).or_default() += d;
                pinned[core].insert(a / LINE_BYTES as u64);
            }
            _ => {
                if rng.gen_bool(0.5) {
                    s.soft_merge(core);
                } else {
                    s.merge(core).unwrap();
                }
                pinned[core].clear();
            }
        }
        s.check_invariants().unwrap_or_else(|e| panic!("step {step}: {e}"));
        for (c, lines) in pinned.iter().enumerate() {
            for &l in lines {
                let meta = s
                    .l1_meta(c, l)
                    .unwrap_or_else(|| panic!("step {step}: pinned line {l:#x} left core {c}"));
                assert!(meta.ccache, "step {step}: line {l:#x} lost its CCache bit");
            }
        }
    }
    for c in 0..CORES {
        s.merge(c).unwrap();
    }
    s.check_invariants().unwrap();
    for (a, want) in cdata_sum {
        assert_eq!(s.peek_word(a).unwrap(), want, "CData word {a:#x}");
    }
    assert_eq!(s.counters().cdata_directory_messages, 0);
    assert_eq!(s.counters().cdata_invalidation_messages, 0);
}
