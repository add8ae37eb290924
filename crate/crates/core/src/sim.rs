//! The coherent part of the hierarchy: private L1/L2 per core, a shared LLC,
//! and a full-map MESI directory co-located with the LLC.
//!
//! The hierarchy is non-inclusive, writeback and write-allocate. Fills from
//! the LLC go to both private levels; L1 victims are written into L2. A core
//! holds a coherent line while either private level has it, and the MESI
//! state of both copies is kept equal. When both copies exist the L1 copy
//! holds the current data.
//!
//! Latency is additive: every level probed on the way down contributes its
//! hit latency, and a full miss adds the memory latency.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cache::{CacheArray, LineMeta, Mesi};
use crate::ccache::{InFlightMerge, Mfrf, SourceBuffer};
use crate::config::{Level, SimConfig};
use crate::counters::Counters;
use crate::error::{CoreId, Result, SimError};
use crate::line::{line_of, word_in_line, Line, LINE_BYTES, WORD_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AccessKind {
    Load,
    Store(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessResult {
    pub value: u64,
    pub latency: u64,
    pub level: Level,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirEntry {
    /// Bitmask of cores holding the line.
    pub sharers: u64,
    /// Core holding the line in E or M. Implies `sharers == 1 << owner`.
    pub owner: Option<u8>,
}

impl DirEntry {
    pub fn state(&self) -> DirState {
        match (self.owner, self.sharers) {
            (Some(_), _) => DirState::Exclusive,
            (None, 0) => DirState::Uncached,
            (None, _) => DirState::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirState {
    Uncached,
    Shared,
    Exclusive,
}

pub(crate) struct CoreState {
    pub l1: CacheArray,
    pub l2: CacheArray,
    pub sb: SourceBuffer,
    pub mfrf: Mfrf,
    pub inflight: Option<InFlightMerge>,
}

pub struct Simulator {
    pub(crate) cfg: SimConfig,
    pub(crate) cores: Vec<CoreState>,
    pub(crate) llc: CacheArray,
    pub(crate) memory: Vec<Line>,
    pub(crate) cdata: Vec<bool>,
    pub(crate) directory: Vec<DirEntry>,
    pub(crate) llc_locks: HashMap<u64, CoreId>,
    pub(crate) counters: Counters,
}

impl Simulator {
    /// A machine with `memory_bytes` of zero-initialized simulated memory.
    pub fn new(cfg: SimConfig, memory_bytes: usize) -> Result<Self> {
        cfg.validate()?;
        let lines = memory_bytes.div_ceil(LINE_BYTES);
        let cores = (0..cfg.cache.cores)
            .map(|_| CoreState {
                l1: CacheArray::new(&cfg.cache.l1),
                l2: CacheArray::new(&cfg.cache.l2),
                sb: SourceBuffer::new(cfg.ccache.sb_entries),
                mfrf: Mfrf::default(),
                inflight: None,
            })
            .collect();
        Ok(Self {
            llc: CacheArray::new(&cfg.cache.llc),
            cores,
            memory: vec![[0; 8]; lines],
            cdata: vec![false; lines],
            directory: vec![DirEntry::default(); lines],
            llc_locks: HashMap::new(),
            counters: Counters::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn core_count(&self) -> usize {
        self.cores.len()
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn memory_bytes(&self) -> u64 {
        (self.memory.len() * LINE_BYTES) as u64
    }

    /// Declare `[base, base + len)` as CData. Both ends must be line aligned.
    pub fn declare_cdata(&mut self, base: u64, len: u64) -> Result<()> {
        if !base.is_multiple_of(LINE_BYTES as u64) || !len.is_multiple_of(LINE_BYTES as u64) {
            return Err(SimError::Config(format!(
                "CData region [{base:#x}, +{len:#x}) is not line aligned and padded"
            )));
        }
        if base + len > self.memory_bytes() {
            return Err(SimError::AddressOutOfRange { addr: base + len });
        }
        for line in line_of(base)..line_of(base + len) {
            self.cdata[line as usize] = true;
        }
        Ok(())
    }

    pub fn is_cdata(&self, addr: u64) -> bool {
        self.cdata.get(line_of(addr) as usize).copied().unwrap_or(false)
    }

    pub(crate) fn check_addr(&self, addr: u64) -> Result<u64> {
        if !addr.is_multiple_of(WORD_BYTES as u64) {
            return Err(SimError::MisalignedAccess { addr });
        }
        let line = line_of(addr);
        if line as usize >= self.memory.len() {
            return Err(SimError::AddressOutOfRange { addr });
        }
        Ok(line)
    }

    /// Write a word directly into backing memory, bypassing every cache.
    /// Meant for initializing data before a run starts.
    pub fn init_word(&mut self, addr: u64, value: u64) -> Result<()> {
        let line = self.check_addr(addr)?;
        self.memory[line as usize][word_in_line(addr)] = value;
        if let Some(i) = self.llc.find(line) {
            self.llc.slot_mut(i).data[word_in_line(addr)] = value;
        }
        Ok(())
    }

    /// The architecturally current value of a word, read without side
    /// effects. For CData this is the shared copy (LLC or memory); privatized
    /// copies are not visible until merged.
    pub fn peek_word(&self, addr: u64) -> Result<u64> {
        let line = self.check_addr(addr)?;
        Ok(self.peek_line(line)[word_in_line(addr)])
    }

    pub fn peek_line(&self, line: u64) -> Line {
        let entry = self.directory[line as usize];
        if let Some(owner) = entry.owner {
            if let Some((data, _)) = self.private_data(owner as usize, line) {
                return data;
            }
        }
        match self.llc.find(line) {
            Some(i) => self.llc.slot(i).data,
            None => self.memory[line as usize],
        }
    }

    pub fn directory_entry(&self, line: u64) -> DirEntry {
        self.directory[line as usize]
    }

    /// MESI state of `line` in the private caches of `core`.
    pub fn private_state(&self, core: CoreId, line: u64) -> Mesi {
        let c = &self.cores[core];
        if let Some(i) = c.l1.find(line) {
            let s = c.l1.slot(i);
            if !s.meta.ccache {
                return s.meta.state;
            }
        }
        if let Some(i) = c.l2.find(line) {
            return c.l2.slot(i).meta.state;
        }
        Mesi::Invalid
    }

    pub fn l1_meta(&self, core: CoreId, line: u64) -> Option<LineMeta> {
        let c = &self.cores[core];
        c.l1.find(line).map(|i| c.l1.slot(i).meta)
    }

    pub fn l1_sets(&self) -> usize {
        self.cores[0].l1.sets()
    }

    pub fn l1_set_of(&self, line: u64) -> usize {
        self.cores[0].l1.set_of(line)
    }

    pub fn llc_contains(&self, line: u64) -> bool {
        self.llc.find(line).is_some()
    }

    pub fn llc_lock_holder(&self, line: u64) -> Option<CoreId> {
        self.llc_locks.get(&line).copied()
    }

    // ---- message accounting -------------------------------------------------

    fn dir_msg(&mut self, line: u64, n: u64) {
        self.counters.directory_messages += n;
        if self.cdata[line as usize] {
            self.counters.cdata_directory_messages += n;
        }
    }

    fn inval_msg(&mut self, line: u64) {
        self.counters.invalidation_messages += 1;
        self.dir_msg(line, 1);
        if self.cdata[line as usize] {
            self.counters.cdata_invalidation_messages += 1;
        }
    }

    // ---- private cache helpers ----------------------------------------------

    /// Current private data and dirtiness of a coherent line at `core`.
    fn private_data(&self, core: CoreId, line: u64) -> Option<(Line, bool)> {
        let c = &self.cores[core];
        let l1 = c.l1.find(line).map(|i| c.l1.slot(i)).filter(|s| !s.meta.ccache);
        let l2 = c.l2.find(line).map(|i| c.l2.slot(i));
        match (l1, l2) {
            (Some(a), Some(b)) => Some((a.data, a.meta.dirty || b.meta.dirty)),
            (Some(a), None) => Some((a.data, a.meta.dirty)),
            (None, Some(b)) => Some((b.data, b.meta.dirty)),
            (None, None) => None,
        }
    }

    fn set_private_state(&mut self, core: CoreId, line: u64, state: Mesi, clean: bool) {
        let c = &mut self.cores[core];
        for cache in [&mut c.l1, &mut c.l2] {
            if let Some(i) = cache.find(line) {
                let s = cache.slot_mut(i);
                if !s.meta.ccache {
                    s.meta.state = state;
                    if clean {
                        s.meta.dirty = false;
                    }
                }
            }
        }
    }

    /// Remove a coherent line from both private levels of `core`, returning
    /// its data and dirtiness.
    fn drop_private(&mut self, core: CoreId, line: u64) -> Option<(Line, bool)> {
        let out = self.private_data(core, line);
        let c = &mut self.cores[core];
        if let Some(i) = c.l1.find(line) {
            if !c.l1.slot(i).meta.ccache {
                c.l1.invalidate(i);
            }
        }
        if let Some(i) = c.l2.find(line) {
            c.l2.invalidate(i);
        }
        out
    }

    // ---- LLC ----------------------------------------------------------------

    /// Make room in the LLC set of `line` and return the slot. Locked lines
    /// are never chosen; dirty victims go back to memory.
    fn llc_slot_for(&mut self, line: u64) -> Result<usize> {
        let locks = &self.llc_locks;
        let idx = self
            .llc
            .select_victim(line, |s| !locks.contains_key(&s.line))
            .ok_or(SimError::SetPinned {
                core: 0,
                level: Level::Llc,
                set: self.llc.set_of(line),
            })?;
        let victim = self.llc.slot(idx);
        if victim.valid && victim.meta.dirty {
            self.memory[victim.line as usize] = victim.data;
            self.counters.memory_writebacks += 1;
        }
        Ok(idx)
    }

    /// Write a full line into the LLC, allocating if absent.
    pub(crate) fn llc_write(&mut self, line: u64, data: Line) -> Result<()> {
        let idx = match self.llc.find(line) {
            Some(i) => i,
            None => self.llc_slot_for(line)?,
        };
        self.llc
            .install(idx, line, LineMeta::coherent(Mesi::Invalid, true), data);
        Ok(())
    }

    /// Read a line from the LLC, filling from memory on a miss. Returns the
    /// data, the extra latency beyond the LLC hit latency, and where it hit.
    pub(crate) fn llc_read(&mut self, line: u64) -> Result<(Line, u64, Level)> {
        if let Some(i) = self.llc.find(line) {
            self.counters.llc_hits += 1;
            self.llc.touch(i);
            return Ok((self.llc.slot(i).data, 0, Level::Llc));
        }
        self.counters.llc_misses += 1;
        let data = self.memory[line as usize];
        let idx = self.llc_slot_for(line)?;
        self.llc
            .install(idx, line, LineMeta::coherent(Mesi::Invalid, false), data);
        Ok((data, self.cfg.cache.memory_latency, Level::Memory))
    }

    // ---- evictions ----------------------------------------------------------

    /// Evict a coherent line from L1 into L2.
    fn evict_l1_coherent(&mut self, core: CoreId, idx: usize) -> Result<()> {
        let victim = self.cores[core].l1.slot(idx).clone();
        self.cores[core].l1.invalidate(idx);
        let c = &mut self.cores[core];
        if let Some(j) = c.l2.find(victim.line) {
            let s = c.l2.slot_mut(j);
            s.data = victim.data;
            s.meta.dirty |= victim.meta.dirty;
            s.meta.state = victim.meta.state;
            return Ok(());
        }
        self.fill_l2(core, victim.line, victim.meta, victim.data)
    }

    fn fill_l2(&mut self, core: CoreId, line: u64, meta: LineMeta, data: Line) -> Result<()> {
        let idx = self.cores[core]
            .l2
            .select_victim(line, |_| true)
            .expect("L2 never pins lines");
        if self.cores[core].l2.slot(idx).valid {
            self.evict_l2(core, idx)?;
        }
        self.cores[core].l2.install(idx, line, meta, data);
        Ok(())
    }

    fn evict_l2(&mut self, core: CoreId, idx: usize) -> Result<()> {
        let victim = self.cores[core].l2.slot(idx).clone();
        self.cores[core].l2.invalidate(idx);
        let c = &mut self.cores[core];
        if let Some(i) = c.l1.find(victim.line) {
            if victim.meta.dirty {
                c.l1.slot_mut(i).meta.dirty = true;
            }
            return Ok(());
        }
        // The core no longer holds the line: notify the directory.
        self.dir_msg(victim.line, 1);
        if victim.meta.dirty {
            self.llc_write(victim.line, victim.data)?;
        }
        let e = &mut self.directory[victim.line as usize];
        e.sharers &= !(1u64 << core);
        if e.owner == Some(core as u8) {
            e.owner = None;
        }
        Ok(())
    }

    /// Free an L1 way for `line`. Mergeable CData victims are merged first
    /// (merge-on-evict). Returns the slot and the latency spent merging.
    pub(crate) fn make_l1_room(&mut self, core: CoreId, line: u64) -> Result<(usize, u64)> {
        let l1 = &self.cores[core].l1;
        let idx = l1
            .select_victim(line, |s| !s.meta.pinned())
            .ok_or(SimError::SetPinned {
                core,
                level: Level::L1,
                set: l1.set_of(line),
            })?;
        let victim = l1.slot(idx);
        if !victim.valid {
            return Ok((idx, 0));
        }
        if victim.meta.ccache {
            let vline = victim.line;
            let lat = self.merge_line_now(core, vline)?;
            self.counters.source_buffer_evictions += 1;
            return Ok((idx, lat));
        }
        self.evict_l1_coherent(core, idx)?;
        Ok((idx, 0))
    }

    /// Side-effect-free check that filling `line` into the L1 of `core` will
    /// not run into an LLC line locked by another core or a pinned set.
    pub(crate) fn precheck_l1_fill(&self, core: CoreId, line: u64) -> Result<()> {
        let l1 = &self.cores[core].l1;
        let idx = l1
            .select_victim(line, |s| !s.meta.pinned())
            .ok_or(SimError::SetPinned {
                core,
                level: Level::L1,
                set: l1.set_of(line),
            })?;
        let v = l1.slot(idx);
        if v.valid && v.meta.ccache && self.merge_needs_lock(v.meta.dirty) {
            self.check_lock_free(core, v.line)?;
        }
        Ok(())
    }

    /// Count a lock conflict if `r` is a `LineLocked` error.
    pub(crate) fn note_conflict<T>(&mut self, r: Result<T>) -> Result<T> {
        if let Err(SimError::LineLocked { .. }) = r {
            self.counters.lock_conflicts += 1;
        }
        r
    }

    pub(crate) fn merge_needs_lock(&self, dirty: bool) -> bool {
        dirty || !self.cfg.ccache.dirty_merge
    }

    pub(crate) fn check_lock_free(&self, core: CoreId, line: u64) -> Result<()> {
        match self.llc_locks.get(&line) {
            Some(&holder) if holder != core => Err(SimError::LineLocked { line, holder }),
            _ => Ok(()),
        }
    }

    // ---- coherent accesses --------------------------------------------------

    pub fn load(&mut self, core: CoreId, addr: u64) -> Result<AccessResult> {
        self.access(core, addr, AccessKind::Load)
    }

    pub fn store(&mut self, core: CoreId, addr: u64, value: u64) -> Result<AccessResult> {
        self.access(core, addr, AccessKind::Store(value))
    }

    /// A coherent Load or Store through the hierarchy.
    pub fn access(&mut self, core: CoreId, addr: u64, kind: AccessKind) -> Result<AccessResult> {
        let line = self.check_addr(addr)?;
        if self.cdata[line as usize] {
            return Err(SimError::CoherentAccessToCData { core, line });
        }
        if let Some(i) = self.cores[core].l1.find(line) {
            if self.cores[core].l1.slot(i).meta.ccache {
                return Err(SimError::CoherentAccessToCData { core, line });
            }
        }
        match kind {
            AccessKind::Load => self.counters.loads += 1,
            AccessKind::Store(_) => self.counters.stores += 1,
        }
        let lat_l1 = self.cfg.cache.l1.hit_latency;
        let lat_l2 = self.cfg.cache.l2.hit_latency;
        let lat_llc = self.cfg.cache.llc.hit_latency;
        let w = word_in_line(addr);

        // L1
        if let Some(i) = self.cores[core].l1.find(line) {
            self.counters.l1_hits += 1;
            self.cores[core].l1.touch(i);
            let state = self.cores[core].l1.slot(i).meta.state;
            let mut latency = lat_l1;
            let value = match kind {
                AccessKind::Load => self.cores[core].l1.slot(i).data[w],
                AccessKind::Store(v) => {
                    if state == Mesi::Shared {
                        latency += lat_l2 + lat_llc;
                        self.upgrade(core, line);
                    }
                    self.set_private_state(core, line, Mesi::Modified, false);
                    let s = self.cores[core].l1.slot_mut(i);
                    s.data[w] = v;
                    s.meta.dirty = true;
                    v
                }
            };
            return Ok(AccessResult {
                value,
                latency,
                level: Level::L1,
            });
        }
        let check = self.precheck_l1_fill(core, line);
        self.note_conflict(check)?;
        self.counters.l1_misses += 1;

        // L2
        if let Some(j) = self.cores[core].l2.find(line) {
            self.counters.l2_hits += 1;
            self.cores[core].l2.touch(j);
            let slot = self.cores[core].l2.slot(j).clone();
            let mut latency = lat_l1 + lat_l2;
            let mut meta = slot.meta;
            if let AccessKind::Store(_) = kind {
                if meta.state == Mesi::Shared {
                    latency += lat_llc;
                    self.upgrade(core, line);
                }
                meta.state = Mesi::Modified;
                self.set_private_state(core, line, Mesi::Modified, false);
            }
            let (idx, merge_lat) = self.make_l1_room(core, line)?;
            latency += merge_lat;
            self.cores[core].l1.install(idx, line, meta, slot.data);
            let value = self.finish_in_l1(core, idx, w, kind);
            return Ok(AccessResult {
                value,
                latency,
                level: Level::L2,
            });
        }
        self.counters.l2_misses += 1;

        // Directory / LLC
        let mut latency = lat_l1 + lat_l2 + lat_llc;
        self.dir_msg(line, 1);
        let entry = self.directory[line as usize];
        let mut level = Level::Llc;
        let state = match kind {
            AccessKind::Load => {
                if let Some(owner) = entry.owner {
                    let owner = owner as usize;
                    debug_assert_ne!(owner, core);
                    self.dir_msg(line, 1);
                    let (data, dirty) = self.private_data(owner, line).expect("directory owner holds the line");
                    if dirty {
                        self.llc_write(line, data)?;
                    }
                    self.set_private_state(owner, line, Mesi::Shared, true);
                }
                let e = &mut self.directory[line as usize];
                e.owner = None;
                let others = e.sharers & !(1u64 << core);
                e.sharers |= 1u64 << core;
                if others == 0 {
                    e.owner = Some(core as u8);
                    Mesi::Exclusive
                } else {
                    Mesi::Shared
                }
            }
            AccessKind::Store(_) => {
                self.invalidate_others(core, line)?;
                let e = &mut self.directory[line as usize];
                e.sharers = 1u64 << core;
                e.owner = Some(core as u8);
                Mesi::Modified
            }
        };
        let (data, extra, hit) = self.llc_read(line)?;
        latency += extra;
        if hit == Level::Memory {
            level = Level::Memory;
        }
        let (idx, merge_lat) = self.make_l1_room(core, line)?;
        latency += merge_lat;
        let meta = LineMeta::coherent(state, false);
        self.cores[core].l1.install(idx, line, meta, data);
        if self.cores[core].l2.find(line).is_none() {
            self.fill_l2(core, line, meta, data)?;
        }
        let value = self.finish_in_l1(core, idx, w, kind);
        Ok(AccessResult { value, latency, level })
    }

    fn finish_in_l1(&mut self, core: CoreId, idx: usize, w: usize, kind: AccessKind) -> u64 {
        let s = self.cores[core].l1.slot_mut(idx);
        match kind {
            AccessKind::Load => s.data[w],
            AccessKind::Store(v) => {
                s.data[w] = v;
                s.meta.dirty = true;
                s.meta.state = Mesi::Modified;
                v
            }
        }
    }

    /// S -> M upgrade at the directory.
    fn upgrade(&mut self, core: CoreId, line: u64) {
        self.dir_msg(line, 1);
        // Sharers hold clean copies, so no writeback can be needed here.
        self.invalidate_others(core, line).expect("upgrade never writes back");
        let e = &mut self.directory[line as usize];
        e.sharers = 1u64 << core;
        e.owner = Some(core as u8);
    }

    fn invalidate_others(&mut self, core: CoreId, line: u64) -> Result<()> {
        let sharers = self.directory[line as usize].sharers & !(1u64 << core);
        for other in 0..self.cores.len() {
            if sharers & (1u64 << other) == 0 {
                continue;
            }
            self.inval_msg(line);
            if let Some((data, true)) = self.drop_private(other, line) {
                self.llc_write(line, data)?;
            }
        }
        Ok(())
    }

    /// Atomic test-and-set of a lock word. Returns the store latency when the
    /// lock was free and is now held; `None` (with no side effects) when it
    /// is taken.
    pub fn try_lock_word(&mut self, core: CoreId, addr: u64) -> Result<Option<AccessResult>> {
        if self.peek_word(addr)? != 0 {
            return Ok(None);
        }
        self.store(core, addr, 1).map(Some)
    }

    // ---- invariant checks ---------------------------------------------------

    /// Verify the structural invariants of the hierarchy; returns a
    /// description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut holders: HashMap<u64, Vec<(usize, Mesi)>> = HashMap::new();
        for (core, c) in self.cores.iter().enumerate() {
            for (_, s) in c.l2.valid_slots() {
                if s.meta.ccache {
                    return Err(format!("core {core}: CData line {:#x} in L2", s.line));
                }
            }
            let mut cdata_lines = 0;
            for (_, s) in c.l1.valid_slots() {
                if s.meta.mergeable && !s.meta.ccache {
                    return Err(format!("core {core}: mergeable bit without CCache bit"));
                }
                if s.meta.ccache {
                    cdata_lines += 1;
                    if c.sb.find(s.line).is_none() {
                        return Err(format!("core {core}: CData line {:#x} has no source entry", s.line));
                    }
                    let e = self.directory[s.line as usize];
                    if e.sharers != 0 || e.owner.is_some() {
                        return Err(format!("CData line {:#x} appears in the directory", s.line));
                    }
                }
            }
            if cdata_lines != c.sb.len() {
                return Err(format!(
                    "core {core}: {cdata_lines} CData lines vs {} source entries",
                    c.sb.len()
                ));
            }
            let mut seen = std::collections::HashSet::new();
            for cache in [&c.l1, &c.l2] {
                for (_, s) in cache.valid_slots() {
                    if !s.meta.ccache && seen.insert(s.line) {
                        holders
                            .entry(s.line)
                            .or_default()
                            .push((core, self.private_state(core, s.line)));
                    }
                }
            }
        }
        for (line, hs) in holders {
            let exclusive = hs.iter().filter(|(_, s)| s.is_exclusive()).count();
            if exclusive > 1 || (exclusive == 1 && hs.len() > 1) {
                return Err(format!("SWMR violated on line {line:#x}: {hs:?}"));
            }
            let e = self.directory[line as usize];
            for &(core, state) in &hs {
                if e.sharers & (1u64 << core) == 0 {
                    return Err(format!("core {core} holds {line:#x} but is not a sharer"));
                }
                if state.is_exclusive() && e.owner != Some(core as u8) {
                    return Err(format!("core {core} holds {line:#x} in {state:?} without ownership"));
                }
            }
            if let Some(o) = e.owner {
                if e.sharers != 1u64 << o {
                    return Err(format!("owner {o} of {line:#x} is not the only sharer"));
                }
            }
        }
        for (line, e) in self.directory.iter().enumerate() {
            for core in 0..self.cores.len() {
                if e.sharers & (1u64 << core) != 0 && self.private_state(core, line as u64) == Mesi::Invalid {
                    return Err(format!(
                        "directory lists core {core} for {line:#x} but it holds nothing"
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CCacheConfig, CacheConfig};

    fn sim(cores: usize) -> Simulator {
        let cache = CacheConfig {
            cores,
            ..Default::default()
        };
        Simulator::new(
            SimConfig {
                cache,
                ccache: CCacheConfig::default(),
            },
            1 << 20,
        )
        .unwrap()
    }

    #[test]
    fn latency_by_level() {
        let mut s = sim(2);
        let first = s.load(0, 0x100).unwrap();
        assert_eq!((first.latency, first.level), (4 + 10 + 70 + 300, Level::Memory));
        let hit = s.load(0, 0x108).unwrap();
        assert_eq!((hit.latency, hit.level), (4, Level::L1));
        // Another core finds it in the LLC.
        let llc = s.load(1, 0x100).unwrap();
        assert_eq!((llc.latency, llc.level), (84, Level::Llc));
    }

    #[test]
    fn l2_hit_after_l1_eviction() {
        let mut s = sim(1);
        let sets = s.l1_sets() as u64;
        // Nine lines mapping to the same L1 set push the first one to L2.
        for k in 0..9u64 {
            s.load(0, k * sets * 64).unwrap();
        }
        let r = s.load(0, 0).unwrap();
        assert_eq!((r.latency, r.level), (14, Level::L2));
        s.check_invariants().unwrap();
    }

    #[test]
    fn store_invalidates_sharers() {
        let mut s = sim(3);
        s.load(1, 0x40).unwrap();
        s.load(2, 0x40).unwrap();
        let before = s.counters().invalidation_messages;
        s.store(0, 0x40, 9).unwrap();
        assert_eq!(s.counters().invalidation_messages - before, 2);
        assert_eq!(s.private_state(1, 1), Mesi::Invalid);
        assert_eq!(s.private_state(2, 1), Mesi::Invalid);
        assert_eq!(s.private_state(0, 1), Mesi::Modified);
        assert_eq!(s.load(1, 0x40).unwrap().value, 9);
        assert_eq!(s.private_state(0, 1), Mesi::Shared);
        s.check_invariants().unwrap();
    }

    #[test]
    fn exclusive_then_silent_upgrade() {
        let mut s = sim(2);
        s.load(0, 0).unwrap();
        assert_eq!(s.private_state(0, 0), Mesi::Exclusive);
        let msgs = s.counters().directory_messages;
        let r = s.store(0, 0, 5).unwrap();
        assert_eq!(r.latency, 4);
        assert_eq!(s.counters().directory_messages, msgs);
        assert_eq!(s.private_state(0, 0), Mesi::Modified);
    }

    #[test]
    fn upgrade_from_shared_costs_directory_round_trip() {
        let mut s = sim(2);
        s.load(0, 0).unwrap();
        s.load(1, 0).unwrap();
        let r = s.store(0, 0, 1).unwrap();
        assert_eq!(r.latency, 84);
        assert_eq!(s.counters().invalidation_messages, 1);
    }

    #[test]
    fn coherent_access_to_cdata_is_rejected() {
        let mut s = sim(1);
        s.declare_cdata(0x1000, 64).unwrap();
        assert_eq!(
            s.load(0, 0x1008),
            Err(SimError::CoherentAccessToCData { core: 0, line: 0x40 })
        );
        assert!(s.declare_cdata(0x1001, 64).is_err());
    }

    #[test]
    fn dirty_data_survives_llc_and_private_evictions() {
        let mut cache = CacheConfig::scaled();
        cache.cores = 2;
        let mut s = Simulator::new(
            SimConfig {
                cache,
                ccache: CCacheConfig::default(),
            },
            4 << 20,
        )
        .unwrap();
        let mut shadow = HashMap::new();
        for k in 0..20_000u64 {
            let addr = k * 64 * 7 % (4 << 20);
            s.store((k % 2) as usize, addr, k).unwrap();
            shadow.insert(addr, k);
        }
        for (addr, v) in shadow {
            assert_eq!(s.peek_word(addr).unwrap(), v);
        }
        s.check_invariants().unwrap();
    }

    #[test]
    fn lock_word_test_and_set() {
        let mut s = sim(2);
        assert!(s.try_lock_word(0, 0x200).unwrap().is_some());
        assert!(s.try_lock_word(1, 0x200).unwrap().is_none());
        s.store(0, 0x200, 0).unwrap();
        assert!(s.try_lock_word(1, 0x200).unwrap().is_some());
    }
}
