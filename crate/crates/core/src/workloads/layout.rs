//! Placement of workload data in simulated memory and logical footprint
//! accounting.

use std::cell::Cell;
use std::rc::Rc;

use crate::config::SimConfig;
use crate::error::Result;
use crate::line::LINE_BYTES;
use crate::sim::Simulator;

#[derive(Debug, Clone)]
pub struct Region {
    pub name: String,
    pub base: u64,
    pub bytes: u64,
    pub cdata: bool,
    /// Only the high-water mark of a dynamic region counts toward the
    /// footprint.
    pub used: Option<Rc<Cell<u64>>>,
}

/// Bump allocator of line-aligned, line-padded regions.
#[derive(Debug, Default)]
pub struct Layout {
    regions: Vec<Region>,
    next: u64,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, name: &str, bytes: u64, cdata: bool, used: Option<Rc<Cell<u64>>>) -> u64 {
        let base = self.next;
        let padded = bytes.div_ceil(LINE_BYTES as u64).max(1) * LINE_BYTES as u64;
        self.next += padded;
        self.regions.push(Region {
            name: name.to_string(),
            base,
            bytes: padded,
            cdata,
            used,
        });
        base
    }

    /// A coherent region of `bytes`; returns its base address.
    pub fn alloc(&mut self, name: &str, bytes: u64) -> u64 {
        self.push(name, bytes, false, None)
    }

    /// A CData region of `bytes`.
    pub fn alloc_cdata(&mut self, name: &str, bytes: u64) -> u64 {
        self.push(name, bytes, true, None)
    }

    /// A region of up to `capacity` bytes whose footprint is what the
    /// workload records in the returned cell.
    pub fn alloc_dynamic(&mut self, name: &str, capacity: u64) -> (u64, Rc<Cell<u64>>) {
        let used = Rc::new(Cell::new(0));
        let base = self.push(name, capacity, false, Some(used.clone()));
        (base, used)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn total_bytes(&self) -> u64 {
        self.next
    }

    /// Logical footprint: static regions plus dynamic high-water marks.
    pub fn peak_bytes(&self) -> u64 {
        self.regions
            .iter()
            .map(|r| match &r.used {
                Some(u) => u.get().min(r.bytes),
                None => r.bytes,
            })
            .sum()
    }

    /// A simulator with room for every region and the CData regions
    /// declared.
    pub fn build(&self, cfg: &SimConfig) -> Result<Simulator> {
        let mut sim = Simulator::new(cfg.clone(), self.next.max(LINE_BYTES as u64) as usize)?;
        for r in self.regions.iter().filter(|r| r.cdata) {
            sim.declare_cdata(r.base, r.bytes)?;
        }
        Ok(sim)
    }
}
