use std::path::PathBuf;

use crate::volumes::GridDims;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid dimensions {w}x{h}x{d}: every axis must be at least 1")]
    InvalidDims { w: usize, h: usize, d: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: GridDims, found: GridDims },

    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid volume contents: {0}")]
    InvalidVolume(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point {point:?} projects behind the camera (camera depth {depth})")]
    BehindCamera { point: [f64; 3], depth: f64 },

    #[error("surface voxel {index} at {coords:?} lies behind the camera")]
    VoxelBehindCamera { index: usize, coords: [usize; 3] },

    #[error("surface index is empty")]
    EmptySurface,

    #[error("view has an empty foreground mask")]
    EmptyForeground,

    #[error("image is {found_w}x{found_h}, expected {expected_w}x{expected_h}")]
    ImageSize {
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },

    #[error("camera center lies inside occupied voxel {coords:?}")]
    CameraInsideVolume { coords: [usize; 3] },

    #[error("no colors survive the count threshold")]
    EmptyPalette,

    #[error("optimization diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed {format} data: {message}")]
    Format {
        format: &'static str,
        message: String,
    },

    #[error("{}: {error}", path.display())]
    File { path: PathBuf, error: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn format(format: &'static str, message: impl Into<String>) -> Self {
        Self::Format {
            format,
            message: message.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }

    /// Attaches a file path to an error raised while reading or writing it.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Self::File {
            path: path.into(),
            error: Box::new(self),
        }
    }
}
