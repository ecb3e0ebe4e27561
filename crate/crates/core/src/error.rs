use std::time::Duration;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // kernels
    #[error("transform length must be at least 1")]
    ZeroLength,
    #[error("batch addresses element {needed} but the buffer holds {len}")]
    OutOfBounds { needed: usize, len: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("spectrum is not Hermitian-consistent (bin {bin} has imaginary part {imag:e})")]
    NonHermitian { bin: usize, imag: f64 },
    #[error("{elements} elements exceeds the oracle guard of {limit}")]
    TooLarge { elements: usize, limit: usize },

    // layout
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("slab decomposition needs P <= N0 (P = {ranks}, N0 = {n0})")]
    SlabTooManyRanks { ranks: usize, n0: usize },
    #[error("coordinate {coord:?} outside dims {dims:?}")]
    OutOfRange { coord: Vec<usize>, dims: Vec<usize> },

    // transport
    #[error("rank {rank} is not a member of a communicator of size {size}")]
    InvalidRank { rank: usize, size: usize },
    #[error("tag {0:#x} is outside the user range")]
    InvalidTag(u32),
    #[error("rank {rank} waited {waited:?} for source {source_rank} tag {tag:#x}")]
    Deadlock {
        rank: usize,
        source_rank: usize,
        tag: u32,
        waited: Duration,
    },
    #[error("rank {rank} timed out on tag {tag:#x} from {source_rank}; pending tags {pending:?}")]
    TagMismatchTimeout {
        rank: usize,
        source_rank: usize,
        tag: u32,
        pending: Vec<u32>,
    },
    #[error("worker {rank} panicked: {message}")]
    WorkerPanic { rank: usize, message: String },
    #[error("run aborted after a failure on another rank")]
    Aborted,
    #[error("transport failure: {0}")]
    Transport(String),

    // exchange
    #[error("count mismatch: {0}")]
    CountMismatch(String),
    #[error("staging arena exhausted: {0}")]
    ArenaExhausted(String),
    #[error("incompatible layouts: {0}")]
    IncompatibleLayouts(String),

    // plan
    #[error("grid {grid:?} does not match dims {dims:?}: {reason}")]
    GridMismatch {
        dims: Vec<usize>,
        grid: Vec<usize>,
        reason: String,
    },
    #[error("tensor rank {0} is too low for a distributed transform (need at least 2 axes)")]
    RankTooLow(usize),
    #[error("{kind} cannot run in the {direction} direction")]
    InvalidKindDirection { kind: String, direction: String },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("non-finite input value at local offset {0}")]
    NonFinite(usize),

    // spectral
    #[error("input mean {mean:e} is not zero")]
    NonZeroMean { mean: f64 },
    #[error("operation needs a frequency-domain layout")]
    NotFrequencyLayout,

    // tensor files
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported tensor file: {0}")]
    UnsupportedFormat(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("tensor file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
