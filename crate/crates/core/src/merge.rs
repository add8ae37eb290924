//! Software merge functions.
//!
//! A merge function folds one core's privatized line back into shared storage.
//! It sees three 64-byte merge registers: the source copy captured when the
//! line was privatized, the core's updated copy, and the current memory copy.
//! Src and Upd are read-only; Mem is both input and output. Functions reach
//! the registers only through [`MregPort`], which is also where the cost of a
//! merge body is accounted.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::line::{f64_word, word_f64, Line, WORDS_PER_LINE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MergeReg {
    Src,
    Upd,
    Mem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MergeRegisters {
    pub src: Line,
    pub upd: Line,
    pub mem: Line,
}

impl MergeRegisters {
    pub fn new(src: Line, upd: Line, mem: Line) -> Self {
        Self { src, upd, mem }
    }

    fn reg(&self, reg: MergeReg) -> &Line {
        match reg {
            MergeReg::Src => &self.src,
            MergeReg::Upd => &self.upd,
            MergeReg::Mem => &self.mem,
        }
    }
}

/// Access port handed to a running merge function.
pub struct MregPort<'a> {
    regs: &'a mut MergeRegisters,
    accesses: u64,
    steps: u64,
}

impl<'a> MregPort<'a> {
    pub fn new(regs: &'a mut MergeRegisters) -> Self {
        Self {
            regs,
            accesses: 0,
            steps: 0,
        }
    }

    pub fn rd(&mut self, reg: MergeReg, index: usize) -> Result<u64> {
        if index >= WORDS_PER_LINE {
            return Err(SimError::MergeFunctionOutOfBounds { index });
        }
        self.accesses += 1;
        Ok(self.regs.reg(reg)[index])
    }

    pub fn wr(&mut self, reg: MergeReg, value: u64, index: usize) -> Result<()> {
        if reg != MergeReg::Mem {
            return Err(SimError::WriteToReadOnlyRegister);
        }
        if index >= WORDS_PER_LINE {
            return Err(SimError::MergeFunctionOutOfBounds { index });
        }
        self.accesses += 1;
        self.regs.mem[index] = value;
        Ok(())
    }

    /// Charge `n` non-memory instructions.
    pub fn step(&mut self, n: u64) {
        self.steps += n;
    }

    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Int64,
    Float64,
    Bit,
    ComplexPair,
}

/// Identifies a catalog merge function together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MergeSpec {
    AddDiff,
    VecAddFloat,
    OrMerge,
    MinMerge,
    SaturatingAdd { threshold: i64 },
    ComplexMul,
    ApproxDrop { base: Box<MergeSpec>, p: f64, seed: u64 },
}

impl MergeSpec {
    pub fn approx_drop(base: MergeSpec, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::InvalidProbability(p));
        }
        Ok(MergeSpec::ApproxDrop {
            base: Box::new(base),
            p,
            seed,
        })
    }

    pub fn element_kind(&self) -> ElementKind {
        match self {
            MergeSpec::AddDiff | MergeSpec::MinMerge | MergeSpec::SaturatingAdd { .. } => ElementKind::Int64,
            MergeSpec::VecAddFloat => ElementKind::Float64,
            MergeSpec::OrMerge => ElementKind::Bit,
            MergeSpec::ComplexMul => ElementKind::ComplexPair,
            MergeSpec::ApproxDrop { base, .. } => base.element_kind(),
        }
    }

    /// Look up a catalog entry by name. Parameterized entries use call syntax:
    /// `saturating_add(255)`, `approx_drop(add_diff, 0.1, 7)`.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        let unknown = || SimError::UnknownMergeFunction(name.to_string());
        let (head, args) = match name.find('(') {
            Some(open) if name.ends_with(')') => (name[..open].trim(), Some(&name[open + 1..name.len() - 1])),
            Some(_) => return Err(unknown()),
            None => (name, None),
        };
        match (head, args) {
            ("add_diff", None) => Ok(MergeSpec::AddDiff),
            ("vec_add_float", None) => Ok(MergeSpec::VecAddFloat),
            ("or_merge", None) => Ok(MergeSpec::OrMerge),
            ("min_merge", None) => Ok(MergeSpec::MinMerge),
            ("complex_mul", None) => Ok(MergeSpec::ComplexMul),
            ("saturating_add", Some(a)) => {
                let threshold = a.trim().parse().map_err(|_| unknown())?;
                Ok(MergeSpec::SaturatingAdd { threshold })
            }
            ("approx_drop", Some(a)) => {
                let mut parts = a.rsplitn(3, ',');
                let seed = parts.next().ok_or_else(unknown)?.trim();
                let p = parts.next().ok_or_else(unknown)?.trim();
                let base = parts.next().ok_or_else(unknown)?;
                let seed = seed.parse().map_err(|_| unknown())?;
                let p: f64 = p.parse().map_err(|_| unknown())?;
                MergeSpec::approx_drop(MergeSpec::parse(base)?, p, seed)
            }
            _ => Err(unknown()),
        }
    }

    pub fn instantiate(&self) -> Result<MergeFunction> {
        self.instantiate_for_core(0)
    }

    /// Build an executable instance. `approx_drop` instances get a generator
    /// seeded from the spec seed and the core id, so cores drop independently
    /// but reproducibly.
    pub fn instantiate_for_core(&self, core: usize) -> Result<MergeFunction> {
        let rng = match self {
            MergeSpec::ApproxDrop { p, seed, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(SimError::InvalidProbability(*p));
                }
                let mixed = seed.wrapping_add((core as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                Some(ChaCha8Rng::seed_from_u64(mixed))
            }
            _ => None,
        };
        Ok(MergeFunction {
            spec: self.clone(),
            rng,
            dropped: 0,
        })
    }
}

impl fmt::Display for MergeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MergeSpec::AddDiff => f.write_str("add_diff"),
            MergeSpec::VecAddFloat => f.write_str("vec_add_float"),
            MergeSpec::OrMerge => f.write_str("or_merge"),
            MergeSpec::MinMerge => f.write_str("min_merge"),
            MergeSpec::ComplexMul => f.write_str("complex_mul"),
            MergeSpec::SaturatingAdd { threshold } => write!(f, "saturating_add({threshold})"),
            MergeSpec::ApproxDrop { base, p, seed } => write!(f, "approx_drop({base},{p},{seed})"),
        }
    }
}

/// An installed merge function (one MFRF slot).
#[derive(Debug, Clone)]
pub struct MergeFunction {
    spec: MergeSpec,
    rng: Option<ChaCha8Rng>,
    dropped: u64,
}

impl MergeFunction {
    pub fn spec(&self) -> &MergeSpec {
        &self.spec
    }

    /// Number of merges an `approx_drop` wrapper has discarded so far.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn apply(&mut self, port: &mut MregPort<'_>) -> Result<()> {
        match &self.spec {
            MergeSpec::ApproxDrop { base, p, .. } => {
                let rng = self.rng.as_mut().expect("approx_drop instance carries a generator");
                port.step(1);
                if rng.gen_bool(*p) {
                    self.dropped += 1;
                    return Ok(());
                }
                apply_base(base, port)
            }
            spec => apply_base(spec, port),
        }
    }
}

fn apply_base(spec: &MergeSpec, port: &mut MregPort<'_>) -> Result<()> {
    match spec {
        MergeSpec::AddDiff => add_diff(port),
        MergeSpec::VecAddFloat => vec_add_float(port),
        MergeSpec::OrMerge => or_merge(port),
        MergeSpec::MinMerge => min_merge(port),
        MergeSpec::SaturatingAdd { threshold } => saturating_add(port, *threshold),
        MergeSpec::ComplexMul => complex_mul(port),
        MergeSpec::ApproxDrop { base, .. } => apply_base(base, port),
    }
}

/// `mem[i] += upd[i] - src[i]` over eight int64 words (wrapping).
pub fn add_diff(port: &mut MregPort<'_>) -> Result<()> {
    for i in 0..WORDS_PER_LINE {
        let s = port.rd(MergeReg::Src, i)?;
        let u = port.rd(MergeReg::Upd, i)?;
        if s == u {
            port.step(1);
            continue;
        }
        let m = port.rd(MergeReg::Mem, i)?;
        port.step(3);
        port.wr(MergeReg::Mem, m.wrapping_add(u.wrapping_sub(s)), i)?;
    }
    Ok(())
}

/// Float analog of [`add_diff`].
pub fn vec_add_float(port: &mut MregPort<'_>) -> Result<()> {
    for i in 0..WORDS_PER_LINE {
        let s = port.rd(MergeReg::Src, i)?;
        let u = port.rd(MergeReg::Upd, i)?;
        if s == u {
            port.step(1);
            continue;
        }
        let m = word_f64(port.rd(MergeReg::Mem, i)?);
        port.step(3);
        let merged = m + (word_f64(u) - word_f64(s));
        port.wr(MergeReg::Mem, f64_word(merged), i)?;
    }
    Ok(())
}

/// Bitwise union; bits are only ever set, so the source copy is not needed.
pub fn or_merge(port: &mut MregPort<'_>) -> Result<()> {
    for i in 0..WORDS_PER_LINE {
        let u = port.rd(MergeReg::Upd, i)?;
        let m = port.rd(MergeReg::Mem, i)?;
        port.step(2);
        if m | u != m {
            port.wr(MergeReg::Mem, m | u, i)?;
        }
    }
    Ok(())
}

pub fn min_merge(port: &mut MregPort<'_>) -> Result<()> {
    for i in 0..WORDS_PER_LINE {
        let u = port.rd(MergeReg::Upd, i)? as i64;
        let m = port.rd(MergeReg::Mem, i)? as i64;
        port.step(2);
        if u < m {
            port.wr(MergeReg::Mem, u as u64, i)?;
        }
    }
    Ok(())
}

/// Add the core's delta, clamped to `threshold`. The clamp tests the memory
/// copy, not the updated copy: other cores' merges may already have pushed
/// memory close to the limit.
pub fn saturating_add(port: &mut MregPort<'_>, threshold: i64) -> Result<()> {
    for i in 0..WORDS_PER_LINE {
        let s = port.rd(MergeReg::Src, i)? as i64;
        let u = port.rd(MergeReg::Upd, i)? as i64;
        if s == u {
            port.step(1);
            continue;
        }
        let m = port.rd(MergeReg::Mem, i)? as i64;
        port.step(4);
        let merged = m.saturating_add(u.wrapping_sub(s)).min(threshold);
        port.wr(MergeReg::Mem, merged as u64, i)?;
    }
    Ok(())
}

/// Word pairs are complex numbers (re, im). The core's update is the ratio
/// `upd / src`, applied multiplicatively to memory.
pub fn complex_mul(port: &mut MregPort<'_>) -> Result<()> {
    for pair in 0..WORDS_PER_LINE / 2 {
        let (re, im) = (2 * pair, 2 * pair + 1);
        let (sr, si) = (port.rd(MergeReg::Src, re)?, port.rd(MergeReg::Src, im)?);
        let (ur, ui) = (port.rd(MergeReg::Upd, re)?, port.rd(MergeReg::Upd, im)?);
        if (sr, si) == (ur, ui) {
            port.step(2);
            continue;
        }
        let (sr, si, ur, ui) = (word_f64(sr), word_f64(si), word_f64(ur), word_f64(ui));
        let denom = sr * sr + si * si;
        if denom == 0.0 {
            return Err(SimError::ZeroSourceFactor { pair });
        }
        let fr = (ur * sr + ui * si) / denom;
        let fi = (ui * sr - ur * si) / denom;
        let mr = word_f64(port.rd(MergeReg::Mem, re)?);
        let mi = word_f64(port.rd(MergeReg::Mem, im)?);
        port.step(14);
        port.wr(MergeReg::Mem, f64_word(mr * fr - mi * fi), re)?;
        port.wr(MergeReg::Mem, f64_word(mr * fi + mi * fr), im)?;
    }
    Ok(())
}

/// Run `f` on standalone lines and return the new memory line.
pub fn apply_lines(f: &mut MergeFunction, src: &Line, upd: &Line, mem: &Line) -> Result<Line> {
    let mut regs = MergeRegisters::new(*src, *upd, *mem);
    let mut port = MregPort::new(&mut regs);
    f.apply(&mut port)?;
    Ok(regs.mem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::line::{line_from_f64, line_from_i64};

    fn one(spec: &MergeSpec, src: Line, upd: Line, mem: Line) -> Line {
        apply_lines(&mut spec.instantiate().unwrap(), &src, &upd, &mem).unwrap()
    }

    fn word0_i(v: i64) -> Line {
        let mut l = [0i64; 8];
        l[0] = v;
        line_from_i64(l)
    }

    fn word0_f(v: f64) -> Line {
        let mut l = [0.0; 8];
        l[0] = v;
        line_from_f64(l)
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn add_diff_examples() {
        let s = MergeSpec::AddDiff;
        assert_eq!(one(&s, word0_i(5), word0_i(9), word0_i(7))[0] as i64, 11);
        assert_eq!(one(&s, word0_i(4), word0_i(4), word0_i(7))[0] as i64, 7);
        // Three cores each +1 from src=0; every merge order ends at 3.
        for order in permutations(3) {
            let mut mem = word0_i(0);
            for _ in order {
                mem = one(&s, word0_i(0), word0_i(1), mem);
            }
            assert_eq!(mem[0] as i64, 3);
        }
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn or_merge_examples() {
        let s = MergeSpec::OrMerge;
        assert_eq!(one(&s, [0; 8], word0_i(0b1000), word0_i(0b0010))[0], 0b1010);
        assert_eq!(one(&s, [0; 8], [0; 8], word0_i(0b0110))[0], 0b0110);
        let maps = [0b0001u64, 0b0110, 0b1000, 0b0101];
        for order in permutations(4) {
            let mut mem = [0u64; 8];
            for i in order {
                mem = one(&s, [0; 8], word0_i(maps[i] as i64), mem);
            }
            assert_eq!(mem[0], 0b1111);
        }
    }

    #[test]
    fn saturating_add_examples() {
        let s = MergeSpec::SaturatingAdd { threshold: 255 };
        assert_eq!(one(&s, word0_i(0), word0_i(10), word0_i(250))[0] as i64, 255);
        assert_eq!(one(&s, word0_i(0), word0_i(3), word0_i(5))[0] as i64, 8);
        for order in [[200, 100], [100, 200]] {
            let mut mem = word0_i(0);
            for d in order {
                mem = one(&s, word0_i(0), word0_i(d), mem);
            }
            assert_eq!(mem[0] as i64, 255);
        }
    }

    #[test]
    fn saturating_clamp_reads_memory_copy() {
        // Each core only sees its own +150 and would never clamp; the clamp
        // must come from the memory copy, which already holds the other core's
        // contribution.
        let s = MergeSpec::SaturatingAdd { threshold: 255 };
        let mem = one(&s, word0_i(0), word0_i(150), word0_i(0));
        assert_eq!(mem[0] as i64, 150);
        let mem = one(&s, word0_i(0), word0_i(150), mem);
        assert_eq!(mem[0] as i64, 255);
        // A clamp on the updated copy alone would have produced 300.
    }

    #[test]
    fn complex_mul_examples() {
        let s = MergeSpec::ComplexMul;
        let c = |re: f64, im: f64| {
            let mut l = [0.0; 8];
            l[0] = re;
            l[1] = im;
            // unused pairs: src = upd = 1 so they are left alone
            line_from_f64(l)
        };
        let out = one(&s, c(1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0));
        assert!((word_f64(out[0]) - 0.0).abs() < 1e-12);
        assert!((word_f64(out[1]) - 6.0).abs() < 1e-12);
        let out = one(&s, c(2.0, 1.0), c(2.0, 1.0), c(3.0, 4.0));
        assert_eq!((word_f64(out[0]), word_f64(out[1])), (3.0, 4.0));
        // Two cores: x2i and x3, both from src=1, memory 1 -> 6i either way.
        let a = (c(1.0, 0.0), c(0.0, 2.0));
        let b = (c(1.0, 0.0), c(3.0, 0.0));
        for (first, second) in [(a, b), (b, a)] {
            let m = one(&s, first.0, first.1, c(1.0, 0.0));
            let m = one(&s, second.0, second.1, m);
            assert!(word_f64(m[0]).abs() < 1e-9);
            assert!((word_f64(m[1]) - 6.0).abs() < 1e-9);
        }
        let err = apply_lines(&mut s.instantiate().unwrap(), &c(0.0, 0.0), &c(1.0, 0.0), &c(1.0, 0.0));
        assert_eq!(err, Err(SimError::ZeroSourceFactor { pair: 0 }));
    }

    #[test]
    fn vec_add_float_examples() {
        let s = MergeSpec::VecAddFloat;
        assert_eq!(word_f64(one(&s, word0_f(1.5), word0_f(2.5), word0_f(10.0))[0]), 11.0);
        assert_eq!(word_f64(one(&s, word0_f(1.5), word0_f(1.5), word0_f(10.0))[0]), 10.0);
        let deltas = [0.1, 2.75, -1.3, 1e3];
        let expect: f64 = deltas.iter().sum::<f64>() + 5.0;
        for order in permutations(4) {
            let mut mem = word0_f(5.0);
            for i in order {
                mem = one(&s, word0_f(0.5), word0_f(0.5 + deltas[i]), mem);
            }
            let got = word_f64(mem[0]);
            assert!(((got - expect) / expect).abs() < 1e-6);
        }
    }

    #[test]
    fn min_merge_examples() {
        let s = MergeSpec::MinMerge;
        assert_eq!(one(&s, [0; 8], word0_i(3), word0_i(5))[0] as i64, 3);
        assert_eq!(one(&s, [0; 8], word0_i(i64::MAX), word0_i(5))[0] as i64, 5);
        let vals = [9, -4, 17, 2];
        for order in permutations(4) {
            let mut mem = word0_i(i64::MAX);
            for i in order {
                mem = one(&s, [0; 8], word0_i(vals[i]), mem);
            }
            assert_eq!(mem[0] as i64, -4);
        }
    }

    #[test]
    fn approx_drop_extremes_and_rate() {
        let base = MergeSpec::AddDiff;
        let never = MergeSpec::approx_drop(base.clone(), 0.0, 3).unwrap();
        let always = MergeSpec::approx_drop(base.clone(), 1.0, 3).unwrap();
        assert_eq!(
            one(&never, word0_i(5), word0_i(9), word0_i(7)),
            one(&base, word0_i(5), word0_i(9), word0_i(7))
        );
        assert_eq!(one(&always, word0_i(5), word0_i(9), word0_i(7))[0] as i64, 7);
        assert!(matches!(
            MergeSpec::approx_drop(base.clone(), 1.5, 0),
            Err(SimError::InvalidProbability(_))
        ));
        assert!(MergeSpec::approx_drop(base.clone(), -0.1, 0).is_err());

        // 10,000 merges at p = 0.1: expect 1,000 drops, sigma = 30.
        let spec = MergeSpec::approx_drop(base, 0.1, 42).unwrap();
        let mut f = spec.instantiate().unwrap();
        let mut mem = word0_i(0);
        for _ in 0..10_000 {
            mem = apply_lines(&mut f, &word0_i(0), &word0_i(1), &mem).unwrap();
        }
        let dropped = f.dropped() as i64;
        assert!((dropped - 1000).abs() <= 90, "dropped {dropped}");
        assert_eq!(mem[0] as i64, 10_000 - dropped);

        // Same seed, same pattern.
        let mut g = spec.instantiate().unwrap();
        let mut mem2 = word0_i(0);
        for _ in 0..10_000 {
            mem2 = apply_lines(&mut g, &word0_i(0), &word0_i(1), &mem2).unwrap();
        }
        assert_eq!(mem, mem2);
    }

    #[test]
    fn port_discipline() {
        let mut regs = MergeRegisters::new(word0_i(5), [0; 8], [0; 8]);
        let mut port = MregPort::new(&mut regs);
        assert_eq!(port.rd(MergeReg::Src, 0).unwrap(), 5);
        port.wr(MergeReg::Mem, 11, 0).unwrap();
        assert_eq!(port.rd(MergeReg::Mem, 0).unwrap(), 11);
        assert_eq!(port.wr(MergeReg::Src, 1, 0), Err(SimError::WriteToReadOnlyRegister));
        assert_eq!(port.wr(MergeReg::Upd, 1, 0), Err(SimError::WriteToReadOnlyRegister));
        assert_eq!(
            port.rd(MergeReg::Upd, 8),
            Err(SimError::MergeFunctionOutOfBounds { index: 8 })
        );
        assert_eq!(port.accesses(), 3);
    }

    #[test]
    fn catalog_lookup() {
        for name in [
            "add_diff",
            "vec_add_float",
            "or_merge",
            "min_merge",
            "complex_mul",
            "saturating_add(255)",
            "approx_drop(add_diff,0.1,7)",
            "approx_drop(saturating_add(9), 0.5, 1)",
        ] {
            let spec = MergeSpec::parse(name).unwrap();
            assert_eq!(MergeSpec::parse(&spec.to_string()).unwrap(), spec);
        }
        assert!(matches!(
            MergeSpec::parse("bogus_id"),
            Err(SimError::UnknownMergeFunction(_))
        ));
        assert!(MergeSpec::parse("saturating_add").is_err());
        assert!(matches!(
            MergeSpec::parse("approx_drop(add_diff,2,7)"),
            Err(SimError::InvalidProbability(_))
        ));
    }
}
