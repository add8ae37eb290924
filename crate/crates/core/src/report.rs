//! Run reports, normalized rates and CSV output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::counters::Counters;
use crate::error::{Result, SimError};

/// Result of one simulation run. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub workload: String,
    pub variant: String,
    pub cores: usize,
    pub ws_fraction: f64,
    pub seed: u64,
    pub llc_bytes: u64,
    pub l1_bytes: u64,
    pub sb_entries: usize,
    pub merge_cadence: usize,
    pub soft_merge: bool,
    pub dirty_merge: bool,
    pub core_cycles: Vec<u64>,
    pub max_cycles: u64,
    pub counters: Counters,
    pub peak_bytes: u64,
    pub dropped_merges: u64,
    /// `None` when the variant has no exact oracle (approximate merges).
    pub oracle_pass: Option<bool>,
    /// Workload-specific quality metric (K-means intra-cluster distance).
    pub quality: Option<f64>,
    pub error: Option<String>,
}

impl SimReport {
    /// A run that produced no result because of `error`.
    pub fn failed(workload: &str, variant: &str, error: &SimError) -> Self {
        Self {
            workload: workload.to_string(),
            variant: variant.to_string(),
            cores: 0,
            ws_fraction: 0.0,
            seed: 0,
            llc_bytes: 0,
            l1_bytes: 0,
            sb_entries: 0,
            merge_cadence: 0,
            soft_merge: false,
            dirty_merge: false,
            core_cycles: Vec::new(),
            max_cycles: 0,
            counters: Counters::default(),
            peak_bytes: 0,
            dropped_merges: 0,
            oracle_pass: Some(false),
            quality: None,
            error: Some(error.to_string()),
        }
    }

    /// The run finished without error and its oracle (if any) agreed.
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.oracle_pass != Some(false)
    }

    pub fn rate(&self, counter: u64) -> Result<f64> {
        normalize_per_kilocycle(counter, self.max_cycles)
    }

    fn same_experiment(&self, other: &SimReport) -> bool {
        self.workload == other.workload
            && self.cores == other.cores
            && self.ws_fraction == other.ws_fraction
            && self.seed == other.seed
    }
}

/// `counter` events per 1000 cycles.
pub fn normalize_per_kilocycle(counter: u64, total_cycles: u64) -> Result<f64> {
    if total_cycles == 0 {
        return Err(SimError::ZeroCycleRun);
    }
    Ok(counter as f64 * 1000.0 / total_cycles as f64)
}

/// `baseline.max_cycles / candidate.max_cycles`. Both reports must describe
/// the same workload, input and core count.
pub fn speedup(baseline: &SimReport, candidate: &SimReport) -> Result<f64> {
    if !baseline.same_experiment(candidate) {
        return Err(SimError::MismatchedReports(format!(
            "{}/{}/{}/{} vs {}/{}/{}/{}",
            baseline.workload,
            baseline.cores,
            baseline.ws_fraction,
            baseline.seed,
            candidate.workload,
            candidate.cores,
            candidate.ws_fraction,
            candidate.seed
        )));
    }
    if candidate.max_cycles == 0 {
        return Err(SimError::ZeroCycleRun);
    }
    Ok(baseline.max_cycles as f64 / candidate.max_cycles as f64)
}

pub const CSV_COLUMNS: &[&str] = &[
    "workload",
    "variant",
    "cores",
    "ws_fraction",
    "seed",
    "llc_bytes",
    "l1_bytes",
    "sb_entries",
    "merge_cadence",
    "soft_merge",
    "dirty_merge",
    "max_cycles",
    "core_cycles",
    "l1_hits",
    "l1_misses",
    "l2_hits",
    "l2_misses",
    "llc_hits",
    "llc_misses",
    "memory_writebacks",
    "directory_messages",
    "invalidation_messages",
    "cdata_directory_messages",
    "cdata_invalidation_messages",
    "merges_executed",
    "merges_skipped_clean",
    "source_buffer_evictions",
    "lock_conflicts",
    "loads",
    "stores",
    "c_reads",
    "c_writes",
    "peak_bytes",
    "dropped_merges",
    "oracle_pass",
    "quality",
    "error",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl SimReport {
    pub fn csv_record(&self) -> Vec<String> {
        let c = &self.counters;
        let cycles = self
            .core_cycles
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(";");
        vec![
            self.workload.clone(),
            self.variant.clone(),
            self.cores.to_string(),
            self.ws_fraction.to_string(),
            self.seed.to_string(),
            self.llc_bytes.to_string(),
            self.l1_bytes.to_string(),
            self.sb_entries.to_string(),
            self.merge_cadence.to_string(),
            self.soft_merge.to_string(),
            self.dirty_merge.to_string(),
            self.max_cycles.to_string(),
            cycles,
            c.l1_hits.to_string(),
            c.l1_misses.to_string(),
            c.l2_hits.to_string(),
            c.l2_misses.to_string(),
            c.llc_hits.to_string(),
            c.llc_misses.to_string(),
            c.memory_writebacks.to_string(),
            c.directory_messages.to_string(),
            c.invalidation_messages.to_string(),
            c.cdata_directory_messages.to_string(),
            c.cdata_invalidation_messages.to_string(),
            c.merges_executed.to_string(),
            c.merges_skipped_clean.to_string(),
            c.source_buffer_evictions.to_string(),
            c.lock_conflicts.to_string(),
            c.loads.to_string(),
            c.stores.to_string(),
            c.c_reads.to_string(),
            c.c_writes.to_string(),
            self.peak_bytes.to_string(),
            self.dropped_merges.to_string(),
            opt(&self.oracle_pass),
            opt(&self.quality),
            opt(&self.error),
        ]
    }
}

/// Write a header row and one row per report.
pub fn emit_csv<W: Write>(reports: &[SimReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| SimError::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in reports {
        w.write_record(r.csv_record()).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))?;
    Ok(())
}

pub fn csv_string(reports: &[SimReport]) -> Result<String> {
    let mut buf = Vec::new();
    emit_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
