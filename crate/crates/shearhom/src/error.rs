//! Crate-wide error type.

use crate::lattice::Axis;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The shear modulus vanishes on a positive-length chord of the requested
    /// line, so the harmonic average degenerates. Callers that realize the
    /// insulating limit treat this as a harmonic mean of zero.
    #[error("zero shear modulus on the line {axis} = {coord}: harmonic average degenerates")]
    ZeroModulusLine { axis: Axis, coord: f64 },

    /// The Neumann series produced growing or non-finite terms.
    #[error("series diverged at term {term_index}: increase mu0 or reduce the contrast/truncation")]
    Divergence { term_index: usize },

    #[error("dense system is numerically singular")]
    SingularSystem,

    #[error("truncation level j = {j} exceeds the dense-solver guard (j <= {max})")]
    GridTooLarge { j: usize, max: usize },

    #[error("invalid result: {0}")]
    InvalidResult(String),

    #[error("sampled field too coarse: {samples} samples per axis, need at least {needed}")]
    Aliasing { samples: usize, needed: usize },

    #[error("remainder bound undefined: sufficient condition not met (margin = {margin:e} Pa)")]
    BoundUndefined { margin: f64 },

    #[error("invalid regime: {0}")]
    InvalidRegime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
