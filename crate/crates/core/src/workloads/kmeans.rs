//! K-means with a fixed iteration count.
//!
//! Each iteration cores assign their share of the points to the nearest
//! center and add the point into that cluster's accumulator (per-dimension
//! sums plus a count). Core 0 then recomputes the centers and clears the
//! accumulators.

use std::rc::Rc;

use rand::Rng;

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::line::{f64_word, i64_word, word_f64, word_i64, LINE_BYTES, WORDS_PER_LINE};
use crate::merge::MergeSpec;
use crate::report::SimReport;
use crate::sched::{Cpu, Scheduler};

use super::{close, finish, partition, rng_for, Cadence, KmeansParams, Layout, RunResult, Variant, WorkloadConfig};

const SPREAD: f64 = 1000.0;
const NOISE: f64 = 60.0;

/// Element kind of points, centers and accumulators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Elem {
    Int,
    Float,
}

impl Elem {
    fn add(self, a: u64, b: u64) -> u64 {
        match self {
            Elem::Int => a.wrapping_add(b),
            Elem::Float => f64_word(word_f64(a) + word_f64(b)),
        }
    }

    fn one(self) -> u64 {
        match self {
            Elem::Int => 1,
            Elem::Float => f64_word(1.0),
        }
    }

    fn to_f64(self, w: u64) -> f64 {
        match self {
            Elem::Int => word_i64(w) as f64,
            Elem::Float => word_f64(w),
        }
    }

    /// Center coordinate from an accumulated sum and count.
    fn mean(self, sum: u64, count: u64) -> u64 {
        match self {
            Elem::Int => i64_word(word_i64(sum) / word_i64(count)),
            Elem::Float => f64_word(word_f64(sum) / word_f64(count)),
        }
    }

    fn is_zero_count(self, count: u64) -> bool {
        self.to_f64(count) == 0.0
    }

    /// Squared distance; exact for integers.
    fn dist(self, p: &[u64], c: &[u64]) -> f64 {
        match self {
            Elem::Int => p
                .iter()
                .zip(c)
                .map(|(&a, &b)| {
                    let d = word_i64(a) - word_i64(b);
                    d * d
                })
                .sum::<i64>() as f64,
            Elem::Float => p
                .iter()
                .zip(c)
                .map(|(&a, &b)| {
                    let d = word_f64(a) - word_f64(b);
                    d * d
                })
                .sum(),
        }
    }
}

/// Index of the nearest center; ties go to the lowest index.
fn nearest(elem: Elem, p: &[u64], centers: &[u64], m: usize) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (j, c) in centers.chunks(m).enumerate() {
        let d = elem.dist(p, c);
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

pub fn point_count(cfg: &SimConfig, wl: &WorkloadConfig) -> usize {
    let p = &wl.kmeans;
    p.points
        .unwrap_or((wl.ws_bytes(cfg) / (p.dims as u64 * 8)) as usize)
        .max(p.k)
}

/// Points clustered around `k` random centers, row-major as words.
fn gen_points(p: &KmeansParams, n: usize, seed: u64) -> Vec<u64> {
    let mut rng = rng_for(seed, 0x6b6d);
    let truth: Vec<f64> = (0..p.k * p.dims).map(|_| rng.gen::<f64>() * SPREAD).collect();
    let mut points = Vec::with_capacity(n * p.dims);
    for _ in 0..n {
        let j = rng.gen_range(0..p.k);
        for d in 0..p.dims {
            let x = truth[j * p.dims + d] + (rng.gen::<f64>() - 0.5) * 2.0 * NOISE;
            points.push(if p.float {
                f64_word(x)
            } else {
                i64_word(x.round() as i64)
            });
        }
    }
    points
}

/// Serial K-means: final centers as words.
pub fn oracle(p: &KmeansParams, points: &[u64]) -> Vec<u64> {
    let elem = if p.float { Elem::Float } else { Elem::Int };
    let m = p.dims;
    let mut centers = points[..p.k * m].to_vec();
    for _ in 0..p.iterations {
        let mut acc = vec![0u64; p.k * (m + 1)];
        for pt in points.chunks(m) {
            let j = nearest(elem, pt, &centers, m);
            for d in 0..m {
                acc[j * (m + 1) + d] = elem.add(acc[j * (m + 1) + d], pt[d]);
            }
            acc[j * (m + 1) + m] = elem.add(acc[j * (m + 1) + m], elem.one());
        }
        for j in 0..p.k {
            let count = acc[j * (m + 1) + m];
            if !elem.is_zero_count(count) {
                for d in 0..m {
                    centers[j * m + d] = elem.mean(acc[j * (m + 1) + d], count);
                }
            }
        }
    }
    centers
}

/// Mean squared distance from each point to its nearest center.
pub fn intra_cluster_distance(p: &KmeansParams, points: &[u64], centers: &[u64]) -> f64 {
    let elem = if p.float { Elem::Float } else { Elem::Int };
    let n = points.len() / p.dims;
    let total: f64 = points
        .chunks(p.dims)
        .map(|pt| {
            let j = nearest(elem, pt, centers, p.dims);
            elem.dist(pt, &centers[j * p.dims..(j + 1) * p.dims])
        })
        .sum();
    total / n as f64
}

struct Shared {
    elem: Elem,
    k: usize,
    m: usize,
    n: usize,
    iterations: usize,
    cores: usize,
    points: u64,
    centers: u64,
    /// Accumulator bases: one per core for DUP, otherwise a single one.
    acc: Vec<u64>,
    locks: u64,
    acc_stride: u64,
}

impl Shared {
    /// Address of accumulator word `d` of cluster `j` (d == m is the count).
    fn acc_addr(&self, base: u64, j: usize, d: usize) -> u64 {
        base + j as u64 * self.acc_stride + d as u64 * 8
    }

    fn lock_addr(&self, j: usize) -> u64 {
        self.locks + (j * LINE_BYTES) as u64
    }
}

pub fn run(cfg: &SimConfig, wl: &WorkloadConfig) -> Result<SimReport> {
    let p = &wl.kmeans;
    if p.k == 0 || p.dims == 0 || p.iterations == 0 {
        return Err(SimError::Config("kmeans needs k, dims and iterations >= 1".into()));
    }
    if p.drop_p.is_some() && wl.variant != Variant::Ccache {
        return Err(SimError::Config("approximate merges need the ccache variant".into()));
    }
    let cores = cfg.cache.cores;
    let elem = if p.float { Elem::Float } else { Elem::Int };
    let (k, m) = (p.k, p.dims);
    let n = point_count(cfg, wl);
    let point_words = gen_points(p, n, wl.seed);

    let lines_per_cluster = (m + 1).div_ceil(WORDS_PER_LINE);
    let acc_stride = (lines_per_cluster * LINE_BYTES) as u64;
    let acc_bytes = k as u64 * acc_stride;
    let mut layout = Layout::new();
    let points = layout.alloc("points", (n * m * 8) as u64);
    let centers = layout.alloc("centers", (k * m * 8) as u64);
    let mut locks = 0;
    let acc = match wl.variant {
        Variant::Fgl => {
            let a = layout.alloc("accumulators", acc_bytes);
            locks = layout.alloc("locks", (k * LINE_BYTES) as u64);
            vec![a]
        }
        Variant::Dup => (0..cores)
            .map(|c| layout.alloc(&format!("accumulators.{c}"), acc_bytes))
            .collect(),
        Variant::Ccache => vec![layout.alloc_cdata("accumulators", acc_bytes)],
    };
    if wl.variant == Variant::Ccache {
        check_set_budget(cfg, acc[0], acc_bytes)?;
    }
    let mut sim = layout.build(cfg)?;
    for (i, &w) in point_words.iter().enumerate() {
        sim.init_word(points + i as u64 * 8, w)?;
    }
    for (i, &w) in point_words[..k * m].iter().enumerate() {
        sim.init_word(centers + i as u64 * 8, w)?;
    }
    let shared = Rc::new(Shared {
        elem,
        k,
        m,
        n,
        iterations: p.iterations,
        cores,
        points,
        centers,
        acc,
        locks,
        acc_stride,
    });
    let acc_spec = match p.drop_p {
        Some(drop) => {
            let base = if p.float {
                MergeSpec::VecAddFloat
            } else {
                MergeSpec::AddDiff
            };
            MergeSpec::approx_drop(base, drop, wl.seed)?
        }
        None if p.float => MergeSpec::VecAddFloat,
        None => MergeSpec::AddDiff,
    };
    let reset_spec = if p.float {
        MergeSpec::VecAddFloat
    } else {
        MergeSpec::AddDiff
    };

    let mut sched = Scheduler::new(sim);
    for core in 0..cores {
        let cpu = sched.cpu(core);
        let s = shared.clone();
        let variant = wl.variant;
        let cadence = Cadence::new(cfg, wl);
        let (acc_spec, reset_spec) = (acc_spec.clone(), reset_spec.clone());
        sched.spawn(core, async move {
            program(cpu, s, variant, cadence, acc_spec, reset_spec).await;
        });
    }
    sched.run()?;

    let sim = sched.sim();
    let mut got = Vec::with_capacity(k * m);
    for i in 0..k * m {
        got.push(sim.peek_word(centers + i as u64 * 8)?);
    }
    let quality = intra_cluster_distance(p, &point_words, &got);
    let oracle_pass = if p.drop_p.is_some() {
        None
    } else {
        let want = oracle(p, &point_words);
        Some(match elem {
            Elem::Int => got == want,
            Elem::Float => got
                .iter()
                .zip(&want)
                .all(|(&a, &b)| close(word_f64(a), word_f64(b), 1e-6)),
        })
    };
    Ok(finish(
        &sched,
        cfg,
        wl,
        RunResult {
            peak_bytes: layout.peak_bytes(),
            oracle_pass,
            quality: Some(quality),
        },
    ))
}

/// Accumulator lines mapping to one L1 set must leave a way free.
fn check_set_budget(cfg: &SimConfig, base: u64, bytes: u64) -> Result<()> {
    let sets = cfg.cache.l1.sets() as u64;
    let lines = bytes / LINE_BYTES as u64;
    let per_set = lines.div_ceil(sets);
    let budget = (cfg.cache.l1.ways - 1) as u64;
    if per_set > budget && lines > 0 {
        return Err(SimError::Config(format!(
            "{lines} accumulator lines starting at {base:#x} put {per_set} lines in one L1 set; at most {budget} fit"
        )));
    }
    Ok(())
}

async fn program(
    cpu: Cpu,
    s: Rc<Shared>,
    variant: Variant,
    mut cadence: Cadence,
    acc_spec: MergeSpec,
    reset_spec: MergeSpec,
) {
    let (core, k, m, elem) = (cpu.id(), s.k, s.m, s.elem);
    if variant == Variant::Ccache {
        cpu.merge_init(acc_spec, 0).await;
        cpu.merge_init(reset_spec, 1).await;
    }
    let mine = match variant {
        Variant::Dup => s.acc[core],
        _ => s.acc[0],
    };
    let mut centers = vec![0u64; k * m];
    let mut pt = vec![0u64; m];
    for _ in 0..s.iterations {
        for (i, c) in centers.iter_mut().enumerate() {
            *c = cpu.load(s.centers + i as u64 * 8).await;
        }
        for i in partition(s.n, s.cores, core, 1) {
            for (d, x) in pt.iter_mut().enumerate() {
                *x = cpu.load(s.points + ((i * m + d) * 8) as u64).await;
            }
            cpu.compute((3 * k * m + k) as u64);
            let j = nearest(elem, &pt, &centers, m);
            let add = |d: usize| if d < m { pt[d] } else { elem.one() };
            match variant {
                Variant::Fgl => {
                    cpu.lock(s.lock_addr(j)).await;
                    for d in 0..=m {
                        let a = s.acc_addr(mine, j, d);
                        let v = cpu.load(a).await;
                        cpu.store(a, elem.add(v, add(d))).await;
                    }
                    cpu.unlock(s.lock_addr(j)).await;
                }
                Variant::Dup => {
                    for d in 0..=m {
                        let a = s.acc_addr(mine, j, d);
                        let v = cpu.load(a).await;
                        cpu.store(a, elem.add(v, add(d))).await;
                    }
                }
                Variant::Ccache => {
                    for d in 0..=m {
                        let a = s.acc_addr(mine, j, d);
                        cadence.touch(&cpu, a).await;
                        let v = cpu.c_read(a, 0).await;
                        cpu.c_write(a, elem.add(v, add(d)), 0).await;
                        cadence.count(&cpu, 2).await;
                    }
                }
            }
        }
        if variant == Variant::Ccache {
            cadence.boundary(&cpu).await;
        } else {
            cpu.barrier().await;
        }
        if core == 0 {
            recompute(&cpu, &s, variant, &mut cadence, &centers).await;
        }
        cpu.barrier().await;
    }
}

/// Core 0: new centers from the accumulators, then clear them.
async fn recompute(cpu: &Cpu, s: &Shared, variant: Variant, cadence: &mut Cadence, old: &[u64]) {
    let (k, m, elem) = (s.k, s.m, s.elem);
    let mut sums = vec![0u64; m + 1];
    for j in 0..k {
        for (d, sum) in sums.iter_mut().enumerate() {
            *sum = match variant {
                Variant::Dup => {
                    let mut t = 0;
                    for &base in &s.acc {
                        let a = s.acc_addr(base, j, d);
                        t = elem.add(t, cpu.load(a).await);
                        cpu.store(a, 0).await;
                    }
                    t
                }
                Variant::Fgl => {
                    let a = s.acc_addr(s.acc[0], j, d);
                    let v = cpu.load(a).await;
                    cpu.store(a, 0).await;
                    v
                }
                Variant::Ccache => {
                    let a = s.acc_addr(s.acc[0], j, d);
                    cadence.touch(cpu, a).await;
                    let v = cpu.c_read(a, 1).await;
                    cpu.c_write(a, 0, 1).await;
                    cadence.count(cpu, 2).await;
                    v
                }
            };
        }
        let count = sums[m];
        cpu.compute(2 * m as u64);
        for d in 0..m {
            let c = if elem.is_zero_count(count) {
                old[j * m + d]
            } else {
                elem.mean(sums[d], count)
            };
            cpu.store(s.centers + ((j * m + d) * 8) as u64, c).await;
        }
    }
    if variant == Variant::Ccache {
        cpu.merge().await;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workloads::{run_workload, WorkloadKind};

    fn wl(variant: Variant, params: KmeansParams, seed: u64) -> WorkloadConfig {
        let mut w = WorkloadConfig::new(WorkloadKind::Kmeans, variant);
        w.kmeans = params;
        w.seed = seed;
        w
    }

    #[test]
    fn single_cluster_is_the_centroid() {
        let p = KmeansParams {
            k: 1,
            dims: 3,
            iterations: 1,
            points: Some(50),
            ..Default::default()
        };
        let pts = gen_points(&p, 50, 4);
        let c = oracle(&p, &pts);
        for d in 0..3 {
            let sum: i64 = pts.chunks(3).map(|q| word_i64(q[d])).sum();
            assert_eq!(word_i64(c[d]), sum / 50);
        }
        for v in Variant::ALL {
            let r = run_workload(&SimConfig::scaled(), &wl(v, p.clone(), 4));
            assert!(r.passed(), "{v}: {r:?}");
        }
    }

    #[test]
    fn int_variants_match_oracle() {
        // Two accumulator lines per cluster.
        let p = KmeansParams {
            points: Some(1024),
            dims: 8,
            ..Default::default()
        };
        for v in Variant::ALL {
            let r = run_workload(&SimConfig::scaled(), &wl(v, p.clone(), 2));
            assert_eq!(r.error, None, "{v}");
            assert_eq!(r.oracle_pass, Some(true), "{v}");
        }
    }

    #[test]
    fn float_variants_match_oracle() {
        let p = KmeansParams {
            points: Some(600),
            float: true,
            k: 4,
            dims: 7,
            ..Default::default()
        };
        for v in Variant::ALL {
            let r = run_workload(&SimConfig::scaled(), &wl(v, p.clone(), 3));
            assert!(r.passed(), "{v}: {r:?}");
        }
    }

    #[test]
    fn approx_drop_degrades_quality() {
        let p = KmeansParams {
            points: Some(1024),
            ..Default::default()
        };
        let exact = run_workload(&SimConfig::scaled(), &wl(Variant::Ccache, p.clone(), 5));
        let approx = run_workload(
            &SimConfig::scaled(),
            &wl(Variant::Ccache, KmeansParams { drop_p: Some(0.1), ..p }, 5),
        );
        assert_eq!(approx.error, None);
        assert_eq!(approx.oracle_pass, None);
        assert!(approx.dropped_merges > 0);
        assert!(approx.quality.unwrap() >= exact.quality.unwrap());
    }

    #[test]
    fn approx_drop_needs_ccache() {
        let p = KmeansParams {
            drop_p: Some(0.1),
            ..Default::default()
        };
        let r = run_workload(&SimConfig::scaled(), &wl(Variant::Fgl, p, 1));
        assert!(r.error.is_some());
    }
}
