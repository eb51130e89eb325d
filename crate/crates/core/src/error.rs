use std::io;

use crate::element::ElemKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    ZeroDimension { rows: usize, cols: usize },

    #[error("matrix of {rows}x{cols} elements overflows the addressable size")]
    DimensionOverflow { rows: usize, cols: usize },

    #[error("invalid lane configuration: {0}")]
    InvalidLaneConfig(String),

    #[error("{lanes} lanes of {kind} do not form a supported vector width")]
    UnsupportedLanes { lanes: usize, kind: ElemKind },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix padding ({padded_cols} columns) is not a multiple of region width {region}")]
    RegionMismatch { padded_cols: usize, region: usize },

    #[error("sparsity target {0} is outside [0, 1]")]
    InvalidSparsity(f64),

    #[error("block length {block_len} does not divide padded width {padded_cols}")]
    InvalidBlockLen {
        block_len: usize,
        padded_cols: usize,
    },

    #[error("leaf dimension {leaf_dim} must be a positive multiple of region width {region}")]
    InvalidLeafDim { leaf_dim: usize, region: usize },

    #[error("multiply context is stale: operands changed since preprocessing")]
    StaleContext,

    #[error("worker count must be at least 1")]
    ZeroWorkers,

    #[error("bad magic bytes {0:?}, expected \"MMMB\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("unknown dtype code {0}")]
    UnknownDtype(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("expected {expected} elements, file holds {found}")]
    KindMismatch { expected: ElemKind, found: ElemKind },

    #[error(transparent)]
    Io(#[from] io::Error),
}
