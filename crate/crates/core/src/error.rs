use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {path}")]
    MissingFile { path: PathBuf },

    #[error("unsupported image format for {path}: {detail}")]
    UnsupportedImage { path: PathBuf, detail: String },

    #[error("corrupt image stream in {path}: {source}")]
    CorruptImage {
        path: PathBuf,
        source: image::ImageError,
    },

    #[error("cannot write {path}: {detail}")]
    UnwritablePath { path: PathBuf, detail: String },

    #[error("scribble byte {value} at pixel ({x}, {y}) is not valid for the {encoding} encoding")]
    ScribbleByte {
        x: usize,
        y: usize,
        value: u8,
        encoding: &'static str,
    },

    #[error("{what}: dimensions {actual:?} do not match {expected:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("{what} at pixel ({x}, {y}) is out of range: {value}")]
    OutOfRange {
        what: &'static str,
        x: usize,
        y: usize,
        value: f64,
    },

    #[error("label code {value} at pixel ({x}, {y}) is not in {{0, 1, 2}}")]
    BadLabel { x: usize, y: usize, value: u8 },

    #[error("field must be at least 1x1")]
    EmptyField,

    #[error("square kernel size must be odd and >= 1, got {size}")]
    BadKernel { size: usize },

    #[error("CRF instance has {pixels} pixels, above the cap of {cap}")]
    CrfTooLarge { pixels: usize, cap: usize },

    #[error("manifest {path} line {line}: {detail}")]
    ManifestEntry {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("manifest {path} has no entries")]
    EmptyManifest { path: PathBuf },

    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },

    #[error("degenerate synthetic size: {detail}")]
    DegenerateSynthetic { detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
