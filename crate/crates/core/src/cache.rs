//! Set-associative cache array with strict per-set LRU.

use serde::{Deserialize, Serialize};

use crate::config::LevelConfig;
use crate::line::Line;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mesi {
    Modified,
    Exclusive,
    Shared,
    Invalid,
}

impl Mesi {
    pub fn is_exclusive(self) -> bool {
        matches!(self, Mesi::Modified | Mesi::Exclusive)
    }
}

/// Per-line metadata. For CData lines (`ccache`) the MESI state is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineMeta {
    pub state: Mesi,
    pub dirty: bool,
    pub ccache: bool,
    pub mergeable: bool,
    pub merge_type: u8,
}

impl LineMeta {
    pub const INVALID: LineMeta = LineMeta {
        state: Mesi::Invalid,
        dirty: false,
        ccache: false,
        mergeable: false,
        merge_type: 0,
    };

    pub fn coherent(state: Mesi, dirty: bool) -> Self {
        Self {
            state,
            dirty,
            ..Self::INVALID
        }
    }

    pub fn cdata(merge_type: u8) -> Self {
        Self {
            state: Mesi::Invalid,
            dirty: false,
            ccache: true,
            mergeable: false,
            merge_type,
        }
    }

    /// Lines with the CCache bit set and no mergeable bit may not leave L1.
    pub fn pinned(&self) -> bool {
        self.ccache && !self.mergeable
    }
}

#[derive(Debug, Clone)]
pub struct Slot {
    pub valid: bool,
    pub line: u64,
    pub meta: LineMeta,
    pub data: Line,
    lru: u64,
}

impl Slot {
    fn empty() -> Self {
        Self {
            valid: false,
            line: 0,
            meta: LineMeta::INVALID,
            data: [0; 8],
            lru: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CacheArray {
    sets: usize,
    ways: usize,
    hit_latency: u64,
    slots: Vec<Slot>,
    clock: u64,
}

impl CacheArray {
    pub fn new(cfg: &LevelConfig) -> Self {
        let sets = cfg.sets();
        Self {
            sets,
            ways: cfg.ways,
            hit_latency: cfg.hit_latency,
            slots: vec![Slot::empty(); sets * cfg.ways],
            clock: 0,
        }
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn ways(&self) -> usize {
        self.ways
    }

    pub fn hit_latency(&self) -> u64 {
        self.hit_latency
    }

    #[inline]
    pub fn set_of(&self, line: u64) -> usize {
        (line as usize) & (self.sets - 1)
    }

    fn range(&self, set: usize) -> std::ops::Range<usize> {
        set * self.ways..(set + 1) * self.ways
    }

    pub fn find(&self, line: u64) -> Option<usize> {
        let set = self.set_of(line);
        self.range(set)
            .find(|&i| self.slots[i].valid && self.slots[i].line == line)
    }

    pub fn slot(&self, idx: usize) -> &Slot {
        &self.slots[idx]
    }

    pub fn slot_mut(&mut self, idx: usize) -> &mut Slot {
        &mut self.slots[idx]
    }

    pub fn touch(&mut self, idx: usize) {
        self.clock += 1;
        self.slots[idx].lru = self.clock;
    }

    /// Slots of one set in LRU-first order.
    pub fn set_slots(&self, set: usize) -> impl Iterator<Item = (usize, &Slot)> {
        self.range(set).map(move |i| (i, &self.slots[i]))
    }

    /// Pick the slot to fill for `line`: an invalid way if one exists,
    /// otherwise the least recently used way accepted by `evictable`.
    /// `None` means every valid way was refused.
    pub fn select_victim(&self, line: u64, evictable: impl Fn(&Slot) -> bool) -> Option<usize> {
        let set = self.set_of(line);
        let mut best: Option<usize> = None;
        for i in self.range(set) {
            let s = &self.slots[i];
            if !s.valid {
                return Some(i);
            }
            if evictable(s) && best.is_none_or(|b| s.lru < self.slots[b].lru) {
                best = Some(i);
            }
        }
        best
    }

    /// Overwrite `idx` with a new line and mark it most recently used.
    pub fn install(&mut self, idx: usize, line: u64, meta: LineMeta, data: Line) {
        let s = &mut self.slots[idx];
        s.valid = true;
        s.line = line;
        s.meta = meta;
        s.data = data;
        self.touch(idx);
    }

    pub fn invalidate(&mut self, idx: usize) {
        let s = &mut self.slots[idx];
        s.valid = false;
        s.meta = LineMeta::INVALID;
    }

    pub fn valid_slots(&self) -> impl Iterator<Item = (usize, &Slot)> {
        self.slots.iter().enumerate().filter(|(_, s)| s.valid)
    }
}
