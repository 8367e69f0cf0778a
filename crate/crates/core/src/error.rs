use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("log branch ambiguous: rotation angle {angle} is within 1e-6 of pi")]
    LogBranchAmbiguous { angle: f64 },

    #[error("undefined azimuth for a point at the origin")]
    UndefinedAzimuth,

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("gauss-newton did not converge: {0}")]
    NonConvergence(String),

    #[error("ransac failed: {0}")]
    Ransac(String),

    #[error("malformed scan data: {0}")]
    Format(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for failures caused by the data rather than by the caller or the
    /// filesystem.
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry(_) | Error::NonConvergence(_) | Error::Ransac(_)
        )
    }
}
