use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PtfcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no Fourier frequency lies strictly inside the band ({lower}, {upper}) Hz")]
    EmptyBand { lower: f64, upper: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate input for subject {subject}: {reason}")]
    SubjectDegenerate { subject: String, reason: String },

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("kappa is undefined when expected agreement equals 1")]
    UndefinedKappa,
}

pub type Result<T, E = PtfcError> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> PtfcError {
    PtfcError::InvalidArgument(msg.into())
}
