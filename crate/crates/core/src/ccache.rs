//! Commutative-cache extensions: `c_read`/`c_write`, the per-core source
//! buffer, the merge-function register file, merge registers and the merge
//! procedure with its merge-on-evict and dirty-merge optimizations.
//!
//! CData lines live only in L1 with the CCache bit set. They never produce a
//! directory message: fetches read the LLC (or memory) directly, and merges
//! write the merged line back into the LLC under a per-line LLC lock.

use crate::cache::LineMeta;
use crate::config::Level;
use crate::error::{CoreId, Result, SimError};
use crate::line::{word_in_line, Line};
use crate::merge::{MergeFunction, MergeReg, MergeRegisters, MergeSpec, MregPort};
use crate::sim::{AccessResult, Simulator};

pub const MFRF_SLOTS: usize = 4;

#[derive(Debug, Clone)]
pub struct SourceEntry {
    pub line: u64,
    pub source: Line,
}

/// Fully associative store of source copies, kept in insertion order.
#[derive(Debug, Clone)]
pub struct SourceBuffer {
    capacity: usize,
    entries: Vec<SourceEntry>,
}

impl SourceBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn find(&self, line: u64) -> Option<&SourceEntry> {
        self.entries.iter().find(|e| e.line == line)
    }

    pub fn entries(&self) -> &[SourceEntry] {
        &self.entries
    }

    fn insert(&mut self, line: u64, source: Line) {
        debug_assert!(!self.is_full() && self.find(line).is_none());
        self.entries.push(SourceEntry { line, source });
    }

    fn remove(&mut self, line: u64) -> Option<SourceEntry> {
        let pos = self.entries.iter().position(|e| e.line == line)?;
        Some(self.entries.remove(pos))
    }
}

/// Merge-function register file.
#[derive(Debug, Clone, Default)]
pub struct Mfrf {
    slots: [Option<MergeFunction>; MFRF_SLOTS],
}

impl Mfrf {
    pub fn get(&self, slot: usize) -> Option<&MergeFunction> {
        self.slots.get(slot).and_then(|s| s.as_ref())
    }
}

/// A merge whose LLC line is locked and whose registers are staged.
#[derive(Debug, Clone)]
pub struct InFlightMerge {
    pub line: u64,
    pub regs: MergeRegisters,
    /// Cycles accrued so far (memory fetch, explicit register accesses).
    pub cycles: u64,
}

/// Result of one scheduler step of a `merge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeStep {
    /// More source-buffer entries remain; call again.
    Continue(u64),
    /// The source buffer is empty.
    Done(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeOutcome {
    pub merged: u64,
    pub latency: u64,
}

impl Simulator {
    pub fn merge_init(&mut self, core: CoreId, spec: &MergeSpec, slot: usize) -> Result<()> {
        if slot >= MFRF_SLOTS {
            return Err(SimError::BadMergeSlot { slot });
        }
        let f = spec.instantiate_for_core(core)?;
        self.cores[core].mfrf.slots[slot] = Some(f);
        Ok(())
    }

    /// `merge_init` by catalog name.
    pub fn merge_init_named(&mut self, core: CoreId, name: &str, slot: usize) -> Result<()> {
        let spec = MergeSpec::parse(name)?;
        self.merge_init(core, &spec, slot)
    }

    pub fn mfrf_slot(&self, core: CoreId, slot: usize) -> Option<&MergeSpec> {
        self.cores[core].mfrf.get(slot).map(|f| f.spec())
    }

    /// Total merges discarded by `approx_drop` functions across all cores.
    pub fn dropped_merges(&self) -> u64 {
        self.cores
            .iter()
            .flat_map(|c| c.mfrf.slots.iter().flatten())
            .map(|f| f.dropped())
            .sum()
    }

    pub fn source_buffer(&self, core: CoreId) -> &SourceBuffer {
        &self.cores[core].sb
    }

    pub fn merge_in_flight(&self, core: CoreId) -> bool {
        self.cores[core].inflight.is_some()
    }

    pub fn c_read(&mut self, core: CoreId, addr: u64, slot: usize) -> Result<AccessResult> {
        self.c_access(core, addr, slot, None)
    }

    pub fn c_write(&mut self, core: CoreId, addr: u64, value: u64, slot: usize) -> Result<AccessResult> {
        self.c_access(core, addr, slot, Some(value))
    }

    fn c_access(&mut self, core: CoreId, addr: u64, slot: usize, write: Option<u64>) -> Result<AccessResult> {
        let line = self.check_addr(addr)?;
        if !self.cdata[line as usize] {
            return Err(SimError::NotCData { addr });
        }
        if slot >= MFRF_SLOTS {
            return Err(SimError::BadMergeSlot { slot });
        }
        if self.cores[core].mfrf.get(slot).is_none() {
            return Err(SimError::MergeSlotEmpty { core, slot });
        }
        if self.cores[core].inflight.is_some() {
            return Err(SimError::MergeInFlight { core });
        }
        let w = word_in_line(addr);
        let hit_latency = self.cfg.cache.l1.hit_latency.max(self.cfg.ccache.sb_hit_latency);

        if let Some(i) = self.cores[core].l1.find(line) {
            let l1 = &mut self.cores[core].l1;
            if !l1.slot(i).meta.ccache {
                return Err(SimError::CoherentAccessToCData { core, line });
            }
            l1.touch(i);
            let s = l1.slot_mut(i);
            s.meta.mergeable = false;
            s.meta.merge_type = slot as u8;
            let value = match write {
                Some(v) => {
                    s.data[w] = v;
                    s.meta.dirty = true;
                    v
                }
                None => s.data[w],
            };
            self.count_cop(write.is_some());
            self.counters.l1_hits += 1;
            return Ok(AccessResult {
                value,
                latency: hit_latency,
                level: Level::L1,
            });
        }

        // Miss: verify the whole privatization can proceed before touching
        // any state.
        let flush = self.precheck_privatize(core, line);
        let flush = self.note_conflict(flush)?;

        self.count_cop(write.is_some());
        self.counters.l1_misses += 1;
        self.counters.l2_misses += 1;
        let mut latency =
            self.cfg.cache.l1.hit_latency + self.cfg.cache.l2.hit_latency + self.cfg.cache.llc.hit_latency;
        if let Some(victim) = flush {
            latency += self.merge_line_now(core, victim)?;
            self.counters.source_buffer_evictions += 1;
        }
        let (idx, merge_lat) = self.make_l1_room(core, line)?;
        latency += merge_lat;
        let (data, extra, level) = self.llc_read(line)?;
        latency += extra;
        self.cores[core].sb.insert(line, data);
        let l1 = &mut self.cores[core].l1;
        l1.install(idx, line, LineMeta::cdata(slot as u8), data);
        let s = l1.slot_mut(idx);
        let value = match write {
            Some(v) => {
                s.data[w] = v;
                s.meta.dirty = true;
                v
            }
            None => s.data[w],
        };
        Ok(AccessResult { value, latency, level })
    }

    /// Returns the source-buffer entry that has to be flushed first, if any.
    fn precheck_privatize(&self, core: CoreId, line: u64) -> Result<Option<u64>> {
        self.check_lock_free(core, line)?;
        let flush = if self.cores[core].sb.is_full() {
            Some(self.flush_candidate(core)?)
        } else {
            None
        };
        let l1 = &self.cores[core].l1;
        let frees_set = flush.is_some_and(|l| l1.set_of(l) == l1.set_of(line));
        if !frees_set {
            self.precheck_l1_fill(core, line)?;
        }
        Ok(flush)
    }

    fn count_cop(&mut self, write: bool) {
        if write {
            self.counters.c_writes += 1;
        } else {
            self.counters.c_reads += 1;
        }
    }

    /// Oldest source-buffer entry whose L1 line is mergeable and whose merge
    /// can run now.
    fn flush_candidate(&self, core: CoreId) -> Result<u64> {
        let c = &self.cores[core];
        let mut blocked = None;
        for e in c.sb.entries() {
            let meta = c.l1.slot(c.l1.find(e.line).expect("source entry has an L1 line")).meta;
            if !meta.mergeable {
                continue;
            }
            if self.merge_needs_lock(meta.dirty) {
                if let Err(err) = self.check_lock_free(core, e.line) {
                    blocked.get_or_insert(err);
                    continue;
                }
            }
            return Ok(e.line);
        }
        Err(blocked.unwrap_or(SimError::SourceBufferFull { core }))
    }

    /// Mark every privatized line of `core` mergeable. No merge runs now.
    pub fn soft_merge(&mut self, core: CoreId) -> u64 {
        let c = &mut self.cores[core];
        let lines: Vec<u64> = c.sb.entries().iter().map(|e| e.line).collect();
        for line in lines {
            let i = c.l1.find(line).expect("source entry has an L1 line");
            c.l1.slot_mut(i).meta.mergeable = true;
        }
        1
    }

    /// Acquire the LLC line lock. Returns false (and counts a conflict) if
    /// another core holds it.
    pub fn lock_llc_line(&mut self, core: CoreId, line: u64) -> Result<bool> {
        match self.llc_locks.get(&line) {
            Some(&holder) if holder != core => {
                self.counters.lock_conflicts += 1;
                Ok(false)
            }
            Some(_) => Ok(true),
            None => {
                if !self.llc_contains(line) {
                    self.llc_read(line)?;
                }
                self.llc_locks.insert(line, core);
                Ok(true)
            }
        }
    }

    pub fn unlock_llc_line(&mut self, core: CoreId, line: u64) -> Result<()> {
        match self.llc_locks.get(&line) {
            Some(&holder) if holder == core => {
                self.llc_locks.remove(&line);
                Ok(())
            }
            _ => Err(SimError::UnlockWithoutLock { core, line }),
        }
    }

    /// Drop a clean privatized line without merging.
    fn drop_clean(&mut self, core: CoreId, line: u64) {
        let c = &mut self.cores[core];
        c.sb.remove(line);
        let i = c.l1.find(line).expect("source entry has an L1 line");
        c.l1.invalidate(i);
        self.counters.merges_skipped_clean += 1;
    }

    fn is_clean(&self, core: CoreId, line: u64) -> Result<bool> {
        let c = &self.cores[core];
        if c.sb.find(line).is_none() {
            return Err(SimError::NoSourceEntry { core, line });
        }
        let i =
            c.l1.find(line)
                .filter(|&i| c.l1.slot(i).meta.ccache)
                .ok_or(SimError::NoSourceEntry { core, line })?;
        Ok(!c.l1.slot(i).meta.dirty)
    }

    /// Lock the LLC line of a privatized line and stage the merge registers.
    /// On a lock conflict nothing changes and `LineLocked` is returned.
    pub fn begin_merge_line(&mut self, core: CoreId, line: u64) -> Result<u64> {
        if self.cores[core].inflight.is_some() {
            return Err(SimError::MergeInFlight { core });
        }
        self.is_clean(core, line)?;
        if let Err(e) = self.check_lock_free(core, line) {
            self.counters.lock_conflicts += 1;
            return Err(e);
        }
        let mut cycles = 0;
        if !self.llc_contains(line) {
            cycles += self.cfg.cache.memory_latency;
        }
        self.lock_llc_line(core, line)?;
        let mem = {
            let i = self.llc.find(line).expect("locked line is LLC resident");
            self.llc.slot(i).data
        };
        let c = &self.cores[core];
        let src = c.sb.find(line).expect("checked above").source;
        let upd = c.l1.slot(c.l1.find(line).expect("checked above")).data;
        self.cores[core].inflight = Some(InFlightMerge {
            line,
            regs: MergeRegisters::new(src, upd, mem),
            cycles,
        });
        Ok(cycles)
    }

    pub fn rd_mreg(&mut self, core: CoreId, reg: MergeReg, index: usize) -> Result<u64> {
        let cost = self.cfg.ccache.mreg_access;
        let m = self.cores[core]
            .inflight
            .as_mut()
            .ok_or(SimError::NoMergeInFlight { core })?;
        let v = MregPort::new(&mut m.regs).rd(reg, index)?;
        m.cycles += cost;
        Ok(v)
    }

    pub fn wr_mreg(&mut self, core: CoreId, reg: MergeReg, value: u64, index: usize) -> Result<()> {
        let cost = self.cfg.ccache.mreg_access;
        let m = self.cores[core]
            .inflight
            .as_mut()
            .ok_or(SimError::NoMergeInFlight { core })?;
        MregPort::new(&mut m.regs).wr(reg, value, index)?;
        m.cycles += cost;
        Ok(())
    }

    pub fn merge_registers(&self, core: CoreId) -> Option<&MergeRegisters> {
        self.cores[core].inflight.as_ref().map(|m| &m.regs)
    }

    /// Run the line's merge function on the staged registers, then commit.
    pub fn finish_merge_line(&mut self, core: CoreId) -> Result<u64> {
        let cfg = self.cfg.ccache.clone();
        let c = &mut self.cores[core];
        let m = c.inflight.as_mut().ok_or(SimError::NoMergeInFlight { core })?;
        let i = c.l1.find(m.line).expect("in-flight line stays in L1");
        let slot = c.l1.slot(i).meta.merge_type as usize;
        let f = c.mfrf.slots[slot]
            .as_mut()
            .ok_or(SimError::MergeSlotEmpty { core, slot })?;
        let mut port = MregPort::new(&mut m.regs);
        f.apply(&mut port)?;
        m.cycles += port.steps() + port.accesses() * cfg.mreg_access;
        self.commit_merge_registers(core)
    }

    /// Write the Mem register back to the LLC, release the source entry and
    /// the L1 line, and unlock. Returns the cycles charged for the merge.
    pub fn commit_merge_registers(&mut self, core: CoreId) -> Result<u64> {
        let m = self.cores[core]
            .inflight
            .take()
            .ok_or(SimError::NoMergeInFlight { core })?;
        let i = self.llc.find(m.line).expect("locked line is LLC resident");
        let s = self.llc.slot_mut(i);
        s.data = m.regs.mem;
        s.meta.dirty = true;
        let c = &mut self.cores[core];
        c.sb.remove(m.line);
        let j = c.l1.find(m.line).expect("in-flight line stays in L1");
        c.l1.invalidate(j);
        self.unlock_llc_line(core, m.line)?;
        self.counters.merges_executed += 1;
        Ok(m.cycles + self.cfg.ccache.merge_overhead)
    }

    /// The complete merge procedure for one line, executed atomically.
    /// Clean lines are dropped for free when dirty-merge is enabled.
    pub fn merge_line(&mut self, core: CoreId, line: u64) -> Result<u64> {
        if self.cores[core].inflight.is_some() {
            return Err(SimError::MergeInFlight { core });
        }
        self.merge_line_now(core, line)
    }

    pub(crate) fn merge_line_now(&mut self, core: CoreId, line: u64) -> Result<u64> {
        let clean = self.is_clean(core, line)?;
        if clean && self.cfg.ccache.dirty_merge {
            self.drop_clean(core, line);
            return Ok(0);
        }
        self.begin_merge_line(core, line)?;
        self.finish_merge_line(core)
    }

    /// Merge every source-buffer entry in insertion order. Afterwards the
    /// source buffer is empty and no L1 line of `core` carries the CCache bit.
    pub fn merge(&mut self, core: CoreId) -> Result<MergeOutcome> {
        let before = self.counters.merges_executed;
        let mut out = MergeOutcome { merged: 0, latency: 0 };
        loop {
            match self.merge_step(core)? {
                MergeStep::Continue(l) => out.latency += l,
                MergeStep::Done(l) => {
                    out.latency += l;
                    break;
                }
            }
        }
        out.merged = self.counters.merges_executed - before;
        Ok(out)
    }

    /// Advance a `merge` by one scheduler step: either finish the in-flight
    /// line, or drop clean entries and lock/stage the next dirty one.
    pub fn merge_step(&mut self, core: CoreId) -> Result<MergeStep> {
        let mut latency = 0;
        if self.cores[core].inflight.is_some() {
            latency += self.finish_merge_line(core)?;
            self.counters.source_buffer_evictions += 1;
            return Ok(if self.cores[core].sb.is_empty() {
                MergeStep::Done(latency)
            } else {
                MergeStep::Continue(latency)
            });
        }
        let mut progressed = false;
        while let Some(line) = self.cores[core].sb.entries().first().map(|e| e.line) {
            if self.is_clean(core, line)? && self.cfg.ccache.dirty_merge {
                self.drop_clean(core, line);
                self.counters.source_buffer_evictions += 1;
                progressed = true;
                continue;
            }
            return match self.begin_merge_line(core, line) {
                Ok(l) => Ok(MergeStep::Continue(latency + l)),
                Err(SimError::LineLocked { .. }) if progressed => Ok(MergeStep::Continue(latency)),
                Err(e) => Err(e),
            };
        }
        Ok(MergeStep::Done(latency))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::line::LINE_BYTES;

    const BASE: u64 = 0x1000;

    fn sim(cores: usize) -> Simulator {
        let mut cfg = SimConfig::default();
        cfg.cache.cores = cores;
        let mut s = Simulator::new(cfg, 1 << 20).unwrap();
        s.declare_cdata(BASE, 64 << 10).unwrap();
        for c in 0..cores {
            s.merge_init(c, &MergeSpec::AddDiff, 0).unwrap();
        }
        s
    }

    fn line_of(addr: u64) -> u64 {
        addr / LINE_BYTES as u64
    }

    #[test]
    fn c_read_fetches_then_hits() {
        let mut s = sim(1);
        s.init_word(BASE, 5).unwrap();
        // Warm the LLC without touching any private cache.
        s.lock_llc_line(0, line_of(BASE)).unwrap();
        s.unlock_llc_line(0, line_of(BASE)).unwrap();
        let a = s.c_read(0, BASE, 0).unwrap();
        assert_eq!((a.value, a.latency), (5, 84));
        let b = s.c_read(0, BASE + 8, 0).unwrap();
        assert_eq!(b.latency, 4);
        assert_eq!(s.counters().cdata_directory_messages, 0);
        assert!(s.l1_meta(0, line_of(BASE)).unwrap().ccache);
    }

    #[test]
    fn c_write_miss_captures_source() {
        let mut s = sim(1);
        s.init_word(BASE, 5).unwrap();
        let r = s.c_write(0, BASE, 9, 0).unwrap();
        assert_eq!(r.latency, 384);
        let e = s.source_buffer(0).find(line_of(BASE)).unwrap();
        assert_eq!(e.source[0], 5);
        assert_eq!(s.c_read(0, BASE, 0).unwrap().value, 9);
        // Memory is untouched until the merge.
        assert_eq!(s.peek_word(BASE).unwrap(), 5);
    }

    #[test]
    fn soft_merge_defers_work() {
        let mut s = sim(1);
        s.c_write(0, BASE, 1, 0).unwrap();
        let before = s.counters().merges_executed;
        s.soft_merge(0);
        assert_eq!(s.counters().merges_executed, before);
        assert_eq!(s.source_buffer(0).len(), 1);
        assert!(s.l1_meta(0, line_of(BASE)).unwrap().mergeable);
        // A later access clears the mergeable bit again.
        s.c_read(0, BASE, 0).unwrap();
        assert!(!s.l1_meta(0, line_of(BASE)).unwrap().mergeable);
    }

    #[test]
    fn add_diff_merge_result_and_cost() {
        let mut s = sim(2);
        s.init_word(BASE, 5).unwrap();
        s.c_write(0, BASE, 9, 0).unwrap();
        // Someone else's update lands in memory meanwhile: 5 -> 7.
        s.c_write(1, BASE, 7, 0).unwrap();
        s.merge(1).unwrap();
        assert_eq!(s.peek_word(BASE).unwrap(), 7);
        let out = s.merge(0).unwrap();
        assert_eq!(s.peek_word(BASE).unwrap(), 11);
        assert_eq!(out.merged, 1);
        // 16 Src/Upd reads, one Mem read and write, 7 + 3 steps, overhead.
        assert_eq!(out.latency, 18 + 10 + 170);
        assert!(s.source_buffer(0).is_empty());
        assert!(s.l1_meta(0, line_of(BASE)).is_none());
        s.check_invariants().unwrap();
    }

    #[test]
    fn merge_lock_serializes_cores() {
        let mut s = sim(2);
        s.c_write(0, BASE, 3, 0).unwrap();
        s.c_write(1, BASE, 4, 0).unwrap();
        s.begin_merge_line(0, line_of(BASE)).unwrap();
        assert_eq!(s.llc_lock_holder(line_of(BASE)), Some(0));
        let err = s.begin_merge_line(1, line_of(BASE)).unwrap_err();
        assert_eq!(
            err,
            SimError::LineLocked {
                line: line_of(BASE),
                holder: 0
            }
        );
        assert!(s.counters().lock_conflicts >= 1);
        s.finish_merge_line(0).unwrap();
        s.begin_merge_line(1, line_of(BASE)).unwrap();
        // The second merge sees the first one's result.
        assert_eq!(s.merge_registers(1).unwrap().mem[0], 3);
        s.finish_merge_line(1).unwrap();
        assert_eq!(s.peek_word(BASE).unwrap(), 7);
    }

    #[test]
    fn locked_line_blocks_c_access_without_side_effects() {
        let mut s = sim(2);
        s.lock_llc_line(1, line_of(BASE)).unwrap();
        let before = s.counters().clone();
        let err = s.c_read(0, BASE, 0).unwrap_err();
        assert!(matches!(err, SimError::LineLocked { holder: 1, .. }));
        assert!(s.source_buffer(0).is_empty());
        assert_eq!(s.counters().c_reads, before.c_reads);
    }

    #[test]
    fn pinned_set_rejects_one_line_too_many() {
        let mut cfg = SimConfig::default();
        cfg.cache.cores = 1;
        cfg.ccache.sb_entries = 32;
        let mut s = Simulator::new(cfg, 4 << 20).unwrap();
        s.declare_cdata(0, 4 << 20).unwrap();
        s.merge_init(0, &MergeSpec::AddDiff, 0).unwrap();
        let ways = s.config().cache.l1.ways as u64;
        let stride = s.l1_sets() as u64 * LINE_BYTES as u64;
        for k in 0..ways {
            s.c_write(0, k * stride, 1, 0).unwrap();
        }
        let err = s.c_write(0, ways * stride, 1, 0).unwrap_err();
        assert!(matches!(err, SimError::SetPinned { core: 0, .. }));
        assert_eq!(s.source_buffer(0).len(), ways as usize);
        // Once marked mergeable, the victim is merged on eviction.
        s.soft_merge(0);
        s.c_write(0, ways * stride, 1, 0).unwrap();
        assert_eq!(s.counters().merges_executed, 1);
        assert_eq!(s.peek_word(0).unwrap(), 1);
    }

    #[test]
    fn full_source_buffer_flushes_oldest_mergeable() {
        let mut s = sim(1);
        let n = s.source_buffer(0).capacity() as u64;
        for k in 0..n {
            s.c_write(0, BASE + k * 64, 1, 0).unwrap();
        }
        assert_eq!(
            s.c_write(0, BASE + n * 64, 1, 0).unwrap_err(),
            SimError::SourceBufferFull { core: 0 }
        );
        s.soft_merge(0);
        s.c_write(0, BASE + n * 64, 1, 0).unwrap();
        assert!(s.source_buffer(0).find(line_of(BASE)).is_none());
        assert_eq!(s.peek_word(BASE).unwrap(), 1);
        assert_eq!(s.counters().source_buffer_evictions, 1);
    }

    #[test]
    fn slot_and_register_errors() {
        let mut s = sim(1);
        assert_eq!(
            s.merge_init_named(0, "no_such_merge", 1).unwrap_err(),
            SimError::UnknownMergeFunction("no_such_merge".into())
        );
        assert_eq!(
            s.merge_init(0, &MergeSpec::AddDiff, 4).unwrap_err(),
            SimError::BadMergeSlot { slot: 4 }
        );
        assert_eq!(
            s.c_read(0, BASE, 2).unwrap_err(),
            SimError::MergeSlotEmpty { core: 0, slot: 2 }
        );
        assert_eq!(s.c_read(0, 0, 0).unwrap_err(), SimError::NotCData { addr: 0 });
        assert_eq!(
            s.rd_mreg(0, MergeReg::Mem, 0).unwrap_err(),
            SimError::NoMergeInFlight { core: 0 }
        );

        s.c_write(0, BASE, 2, 0).unwrap();
        s.begin_merge_line(0, line_of(BASE)).unwrap();
        assert_eq!(
            s.wr_mreg(0, MergeReg::Src, 1, 0).unwrap_err(),
            SimError::WriteToReadOnlyRegister
        );
        assert_eq!(
            s.rd_mreg(0, MergeReg::Upd, 8).unwrap_err(),
            SimError::MergeFunctionOutOfBounds { index: 8 }
        );
        assert_eq!(s.c_read(0, BASE, 0).unwrap_err(), SimError::MergeInFlight { core: 0 });
        s.wr_mreg(0, MergeReg::Mem, 42, 0).unwrap();
        s.commit_merge_registers(0).unwrap();
        assert_eq!(s.peek_word(BASE).unwrap(), 42);
    }

    #[test]
    fn clean_lines_are_dropped_when_dirty_merge_is_on() {
        let mut s = sim(1);
        s.c_read(0, BASE, 0).unwrap();
        let out = s.merge(0).unwrap();
        assert_eq!((out.merged, out.latency), (0, 0));
        assert_eq!(s.counters().merges_skipped_clean, 1);
        assert!(s.llc_lock_holder(line_of(BASE)).is_none());

        let mut cfg = s.config().clone();
        cfg.ccache.dirty_merge = false;
        let mut s = Simulator::new(cfg, 1 << 20).unwrap();
        s.declare_cdata(BASE, 4096).unwrap();
        s.merge_init(0, &MergeSpec::AddDiff, 0).unwrap();
        s.c_read(0, BASE, 0).unwrap();
        let out = s.merge(0).unwrap();
        assert_eq!(out.merged, 1);
        assert!(out.latency >= 170);
    }
}
