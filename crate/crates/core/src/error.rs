use thiserror::Error;

use crate::config::Level;

pub type CoreId = usize;

/// Everything that can go wrong inside a simulation.
///
/// `LineLocked` is the only retryable variant: operations that return it have
/// not mutated any simulator state, and the scheduler re-issues them on the
/// core's next turn.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("coherent access to CData line {line:#x} by core {core}")]
    CoherentAccessToCData { core: CoreId, line: u64 },
    #[error("address {addr:#x} is not inside a declared CData region")]
    NotCData { addr: u64 },
    #[error("address {addr:#x} is outside the simulated address space")]
    AddressOutOfRange { addr: u64 },
    #[error("address {addr:#x} is not word aligned")]
    MisalignedAccess { addr: u64 },
    #[error("every way of {level:?} set {set} on core {core} is pinned by CData")]
    SetPinned { core: CoreId, level: Level, set: usize },
    #[error("core {core} released LLC line {line:#x} without holding it")]
    UnlockWithoutLock { core: CoreId, line: u64 },
    #[error("LLC line {line:#x} is locked by core {holder}")]
    LineLocked { line: u64, holder: CoreId },
    #[error("unknown merge function `{0}`")]
    UnknownMergeFunction(String),
    #[error("merge function slot {slot} is out of range (0..=3)")]
    BadMergeSlot { slot: usize },
    #[error("merge function slot {slot} on core {core} is empty")]
    MergeSlotEmpty { core: CoreId, slot: usize },
    #[error("source buffer of core {core} is full and no entry is mergeable")]
    SourceBufferFull { core: CoreId },
    #[error("no merge in flight on core {core}")]
    NoMergeInFlight { core: CoreId },
    #[error("a merge is already in flight on core {core}")]
    MergeInFlight { core: CoreId },
    #[error("merge registers Src and Upd are read-only")]
    WriteToReadOnlyRegister,
    #[error("merge function accessed word {index} outside the merge registers")]
    MergeFunctionOutOfBounds { index: usize },
    #[error("complex source factor is zero in word pair {pair}")]
    ZeroSourceFactor { pair: usize },
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("core {core} has no source-buffer entry for line {line:#x}")]
    NoSourceEntry { core: CoreId, line: u64 },
    #[error("no core can make progress: cores {blocked:?} are blocked")]
    DeadlockDetected { blocked: Vec<CoreId> },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("run reported zero cycles")]
    ZeroCycleRun,
    #[error("reports describe different experiments: {0}")]
    MismatchedReports(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
