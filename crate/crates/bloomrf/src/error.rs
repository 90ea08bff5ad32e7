//! Error types for every subsystem of the crate.

use thiserror::Error;

/// Errors from layout construction and dyadic interval arithmetic.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("layer heights sum to {got}, domain width is {want}")]
    SumMismatch { got: u32, want: u8 },
    #[error("hashed layer {0} has zero height")]
    ZeroHeight(usize),
    #[error("layer {layer} height {height} exceeds the one-word trace limit ({max})")]
    TraceTooWide { layer: usize, height: u8, max: u8 },
    #[error("unsupported domain width {0} (expected 8, 16, 32 or 64)")]
    UnsupportedWidth(u8),
    #[error("heights vector is empty")]
    EmptyHeights,
    #[error("level {level} outside [0, {max}]")]
    LevelOutOfRange { level: u8, max: u8 },
    #[error("layer {layer} outside hashed range [1, {max}]")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("query [{lo}, {hi}] does not intersect the trace-tree span")]
    NoIntersection { lo: u64, hi: u64 },
}

/// Errors from hash-position computation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HashError {
    #[error("layer {layer} outside hashed range [1, {max}]")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("replica {replica} outside [0, {count})")]
    ReplicaOutOfRange { replica: usize, count: usize },
    #[error("layout has no exact layer")]
    NoExactLayer,
}

/// Errors from filter configuration validation or parsing.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid filter config: {0}")]
    Invalid(String),
    #[error("config text line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Layout(#[from] LayoutError),
}

/// Errors from query argument validation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("invalid range: lo {lo} > hi {hi}")]
    InvalidRange { lo: u64, hi: u64 },
}

/// Errors from the binary filter stream codec.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic bytes (expected \"BRF1\")")]
    BadMagic,
    #[error("unsupported format version {0}")]
    VersionMismatch(u16),
    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("stream truncated (needed {needed} more bytes)")]
    TruncatedStream { needed: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Errors from the tuning advisor.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdvisorError {
    #[error("memory budget of {m} bits is below the 8 bits/key floor for {n} keys")]
    BudgetTooSmall { n: u64, m: u64 },
}

/// Errors from conjunctive probe planning.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("conjunctive plans support at most one range predicate")]
    TwoRanges,
}

/// Errors from float layout construction.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FloatLayoutError {
    #[error("float layout is {0} bits wide (expected 16, 32 or 64)")]
    UnsupportedWidth(u32),
}
