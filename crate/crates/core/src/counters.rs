use serde::{Deserialize, Serialize};

/// Global event counters of one simulator instance. Counters only ever grow.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub l1_hits: u64,
    pub l1_misses: u64,
    pub l2_hits: u64,
    pub l2_misses: u64,
    pub llc_hits: u64,
    pub llc_misses: u64,
    pub memory_writebacks: u64,
    pub directory_messages: u64,
    pub invalidation_messages: u64,
    /// Subset of `directory_messages` whose line lies in a CData region.
    pub cdata_directory_messages: u64,
    /// Subset of `invalidation_messages` whose line lies in a CData region.
    pub cdata_invalidation_messages: u64,
    pub merges_executed: u64,
    pub merges_skipped_clean: u64,
    pub source_buffer_evictions: u64,
    pub lock_conflicts: u64,
    pub loads: u64,
    pub stores: u64,
    pub c_reads: u64,
    pub c_writes: u64,
}

impl Counters {
    /// Every counter with its field name, in declaration order.
    pub fn named(&self) -> [(&'static str, u64); 19] {
        [
            ("l1_hits", self.l1_hits),
            ("l1_misses", self.l1_misses),
            ("l2_hits", self.l2_hits),
            ("l2_misses", self.l2_misses),
            ("llc_hits", self.llc_hits),
            ("llc_misses", self.llc_misses),
            ("memory_writebacks", self.memory_writebacks),
            ("directory_messages", self.directory_messages),
            ("invalidation_messages", self.invalidation_messages),
            ("cdata_directory_messages", self.cdata_directory_messages),
            ("cdata_invalidation_messages", self.cdata_invalidation_messages),
            ("merges_executed", self.merges_executed),
            ("merges_skipped_clean", self.merges_skipped_clean),
            ("source_buffer_evictions", self.source_buffer_evictions),
            ("lock_conflicts", self.lock_conflicts),
            ("loads", self.loads),
            ("stores", self.stores),
            ("c_reads", self.c_reads),
            ("c_writes", self.c_writes),
        ]
    }

    pub fn llc_accesses(&self) -> u64 {
        self.llc_hits + self.llc_misses
    }
}
