//! Error type shared by all stages.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value violates an operation's contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A loss or metric was requested over zero valid pixels.
    #[error("empty validity mask: result is undefined")]
    EmptyMask,

    /// Projection of a point with non-positive camera-frame depth.
    #[error("point behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    /// Superpixel id missing or empty in the partition.
    #[error("superpixel {0} not found or empty")]
    SuperpixelNotFound(u32),

    /// A region or contour too degenerate to polygonize.
    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    /// An operation that needs data points received none.
    #[error("no valid data points")]
    NoData,

    /// A polygon whose plane depth is unusable at some vertex.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// Malformed input file.
    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    /// Bad configuration (missing or inconsistent keys/flags).
    #[error("config error: {0}")]
    Config(String),

    /// A frame id was accumulated twice into the same map.
    #[error("duplicate frame id {0}")]
    DuplicateFrame(u64),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Attach path context to an I/O error.
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
