use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error kinds shared by every pipeline stage.
///
/// [`Error::kind`] gives the stable, machine-readable name used in CLI
/// error lines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("parallax angle below threshold")]
    LowParallax,
    #[error("point has non-positive depth")]
    NegativeDepth,
    #[error("reconstruction failed: {0}")]
    ReconstructionFailed(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InsufficientData(_) => "insufficient-data",
            Error::DegenerateGeometry(_) => "degenerate-geometry",
            Error::LowParallax => "low-parallax",
            Error::NegativeDepth => "negative-depth",
            Error::ReconstructionFailed(_) => "reconstruction-failed",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Malformed(_) => "malformed-input",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
