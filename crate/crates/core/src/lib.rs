//! Cycle-accounting simulator of a multicore cache hierarchy with a MESI
//! directory, extended with on-demand privatization of commutatively updated
//! data (CData): `c_read`/`c_write` privatize lines into L1 with a source copy
//! in a per-core source buffer, and software merge functions fold private
//! updates back into the shared LLC.
//!
//! Layout:
//! - [`sim`]: coherent hierarchy and directory
//! - [`ccache`]: CData primitives, source buffer, merge procedure
//! - [`merge`]: merge-function catalog
//! - [`sched`]: deterministic round-robin scheduler driving per-core programs
//! - [`workloads`]: key-value store, K-means, PageRank and BFS in FGL, DUP
//!   and CCache variants, with serial oracles
//! - [`report`]: run reports, normalization and CSV
//! - [`experiments`]: experiment plans and sweeps

pub mod cache;
pub mod ccache;
pub mod config;
pub mod counters;
pub mod error;
pub mod experiments;
pub mod line;
pub mod merge;
pub mod report;
pub mod sched;
pub mod sim;
pub mod workloads;

pub use config::{CCacheConfig, CacheConfig, ConfigFile, Level, LevelConfig, SimConfig};
pub use error::{CoreId, Result, SimError};
pub use merge::{MergeReg, MergeSpec};
pub use report::SimReport;
pub use sim::{AccessKind, AccessResult, Simulator};
