use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("sample rate {0} Hz is below the supported minimum of 8000 Hz")]
    SampleRateTooLow(u32),
    #[error("expected sample rate {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("expected a chunk of {expected} samples, got {actual}")]
    ChunkLength { expected: usize, actual: usize },
    #[error("shape mismatch: expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} values, got {actual}")]
    TooShort { min: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("non-finite loss (l_real={l_real}, l_gen={l_gen})")]
    NonFiniteLoss { l_real: f64, l_gen: f64 },
    #[error("training diverged: {0} consecutive non-finite steps")]
    Diverged(usize),
    #[error("mixed utterance ids: {0} and {1}")]
    MixedUtterances(String, String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("label {0} outside [-1, 1]")]
    LabelRange(f64),
    #[error("run {run}: {message}")]
    Run { run: usize, message: String },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
