use alloc::string::String;

/// Errors raised by the conversion, selection and verification primitives.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A mathematical argument is outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs are inconsistent with each other (lengths, dimensions, classes).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Frame analysis could not be performed.
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("training failed for speaker {speaker}: {reason}")]
    Training { speaker: String, reason: String },
    /// Rejection sampling of warp parameters exhausted its attempt budget.
    #[error("sampling error: no accepted draw after {attempts} attempts (acceptance rate {acceptance_rate})")]
    Sampling { attempts: usize, acceptance_rate: f64 },
    #[error("embedding error: {0}")]
    Embedding(String),
    #[error("enrollment error: {0}")]
    Enrollment(String),
    /// The trial protocol cannot produce both genuine and impostor scores.
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = core::result::Result<T, Error>;
