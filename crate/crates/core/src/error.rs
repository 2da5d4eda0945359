use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt data: {0}")]
    CorruptData(String),
    #[error("mask contains value {value}, expected 0 or {max}")]
    NonBinaryMask { value: u16, max: u16 },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("mask is empty")]
    EmptyMask,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("blob too small for principal axis estimation (area {0})")]
    DegenerateBlob(usize),
    #[error("rotation angle {0}° outside [-45°, 45°]")]
    AngleOutOfRange(f64),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("detection confidence {confidence} below threshold {threshold}")]
    LowConfidence { confidence: f64, threshold: f64 },
    #[error("detection is for view {found}, expected {expected}")]
    ViewMismatch {
        expected: crate::ViewKind,
        found: crate::ViewKind,
    },
    #[error("box {0:?} lies outside the {1}x{2} image")]
    BoxOutsideImage(crate::BBox, usize, usize),
    #[error("box height {0} too small to split into thirds")]
    TooSmall(usize),
    #[error("expected two lung components, found {0}")]
    NotTwoLungs(usize),
    #[error("lung inner edges overlap (right lung ends at x={right_inner}, left lung starts at x={left_inner})")]
    OverlappingLungs {
        right_inner: usize,
        left_inner: usize,
    },
    #[error("both masks are empty")]
    BothEmpty,
    #[error("empty list")]
    EmptyList,
    #[error("invalid phantom spec: {0}")]
    InvalidSpec(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier used in pipeline result files.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::FileNotFound(_) => "FileNotFound",
            Error::UnsupportedFormat(_) => "UnsupportedFormat",
            Error::CorruptData(_) => "CorruptData",
            Error::NonBinaryMask { .. } => "NonBinaryMask",
            Error::Io { .. } => "IoError",
            Error::InvalidImage(_) => "InvalidImage",
            Error::EmptyMask => "EmptyMask",
            Error::InvalidParams(_) => "InvalidParams",
            Error::DegenerateBlob(_) => "DegenerateBlob",
            Error::AngleOutOfRange(_) => "AngleOutOfRange",
            Error::DimensionMismatch(..) => "DimensionMismatch",
            Error::LowConfidence { .. } => "LowConfidence",
            Error::ViewMismatch { .. } => "ViewMismatch",
            Error::BoxOutsideImage(..) => "BoxOutsideImage",
            Error::TooSmall(_) => "TooSmall",
            Error::NotTwoLungs(_) => "NotTwoLungs",
            Error::OverlappingLungs { .. } => "OverlappingLungs",
            Error::BothEmpty => "BothEmpty",
            Error::EmptyList => "EmptyList",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::MissingInput(_) => "MissingInput",
            Error::Json(_) => "JsonError",
        }
    }
}
