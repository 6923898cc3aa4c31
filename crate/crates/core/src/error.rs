use std::io;

use thiserror::Error;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum CpiError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("slits overlap: pitch {pitch:e} m is smaller than width {width:e} m")]
    Overlap { width: f64, pitch: f64 },

    #[error("degenerate PSF width: {0}")]
    DegenerateWidth(String),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("Fresnel sampling violated for z = {z:e} m; max valid z for this grid is {max_z:e} m")]
    Nyquist { z: f64, max_z: f64 },

    #[error("grid does not cover support [{lo:e}, {hi:e}] m (grid spans [{grid_lo:e}, {grid_hi:e}] m)")]
    Coverage {
        lo: f64,
        hi: f64,
        grid_lo: f64,
        grid_hi: f64,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CpiError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CpiError::InvalidConfig(_) | CpiError::Parse(_) => ErrorClass::Config,
            CpiError::Domain(_)
            | CpiError::Overlap { .. }
            | CpiError::DegenerateWidth(_)
            | CpiError::Aliasing(_)
            | CpiError::Nyquist { .. }
            | CpiError::Coverage { .. } => ErrorClass::Numeric,
            CpiError::Format(_)
            | CpiError::VersionMismatch { .. }
            | CpiError::Checksum(_)
            | CpiError::Io(_)
            | CpiError::Csv(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, CpiError>;
