use std::path::PathBuf;

/// Errors produced by the registration and benchmark pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A minimal sample (or solver input) does not determine a rigid motion.
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    /// Descriptor dimensions of two operands disagree.
    #[error("descriptor dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    /// Robust model fitting needs at least 3 correspondences.
    #[error("need at least 3 correspondences, got {got}")]
    TooFewCorrespondences { got: usize },

    /// RANSAC found no model with enough inliers.
    #[error("no model reached {min_inliers} inliers (best had {best})")]
    NoModel { best: usize, min_inliers: usize },

    /// ICP found no point pairs within the association radius.
    #[error("no associations within {max_distance} m")]
    NoAssociations { max_distance: f64 },

    /// No keyframes fall inside the requested map region.
    #[error("no keyframes within {radius} m of the map center")]
    EmptyMap { radius: f64 },

    /// A simulated scan saw no surface within sensor range.
    #[error("no surface within sensor range")]
    EmptyResult,

    /// Descriptor covariance has rank below three; no color basis exists.
    #[error("descriptor covariance has rank below 3")]
    RankDeficient,

    /// Object insertion was asked to draw from an empty donor list.
    #[error("donor cluster list is empty")]
    EmptyDonors,

    /// An index referred outside its collection.
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    /// A configuration value is outside its valid domain.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Filesystem failure while reading or writing an artifact.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file exists but its contents violate the expected format.
    #[error("{}: {detail}", path.display())]
    Format { path: PathBuf, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format { path: path.into(), detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
