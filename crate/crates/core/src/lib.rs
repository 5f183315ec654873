//! Simulation and post-processing for coincidence measurements of
//! position-momentum entangled Gaussian biphoton states.
//!
//! The crate covers the full chain from state model to analysis:
//!
//! - [`biphoton`]: the entangled Gaussian state, its wavefunctions,
//!   derived widths and covariance matrix, and quadrature rotation of
//!   one arm.
//! - [`measurement`]: binned joint-detection probabilities, multinomial
//!   coincidence sampling, and the phase sweep that feeds the Radon
//!   pipeline.
//! - [`tomography`]: forward Radon transform, projection DFT,
//!   polar-to-Cartesian regridding and inverse-FFT recovery.
//! - [`info`]: plug-in mutual information, Gaussian closed forms, and
//!   the phase-aggregated (Radon) information measures.
//! - [`sepbound`]: the entropic separability bound (6.18 bits) and its
//!   violation statistics for the standard and Radon settings.
//! - [`pipeline`]: end-to-end runs, configuration, file formats and
//!   figure data emission.

use thiserror::Error;

pub mod biphoton;
pub mod info;
pub mod measurement;
pub mod pipeline;
pub mod seeding;
pub mod sepbound;
pub mod tomography;

mod quadrature;

pub use biphoton::{BiphotonParams, GaussianPhaseDensity, GaussianState4};
pub use info::{MiKind, MiResult};
pub use measurement::{Basis, CoincidenceHistogram, DetectorConfig, PhiSweep, SweepFrame};
pub use sepbound::{SepBoundReport, Setting, SEPARABILITY_BOUND_BITS};
pub use tomography::{CartesianSpectrum, DftMode, Grid2D, PolarSpectrum, Sinogram};

/// Errors surfaced by any stage of the simulation or analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("undefined distribution: histogram has no mass")]
    UndefinedDistribution,

    #[error("insufficient angles: reconstruction requires m >= 2, got {0}")]
    InsufficientAngles(usize),

    #[error("incomparable settings: {0}")]
    IncomparableSettings(String),

    #[error("undefined deviation count: std estimate must be positive, got {0}")]
    UndefinedDeviation(f64),

    #[error("count-mode histogram required: {0}")]
    CountModeRequired(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing figure data: {0}")]
    MissingFigureData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for numerical/runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameters(_) | Error::Config(_) | Error::MissingFigureData(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
