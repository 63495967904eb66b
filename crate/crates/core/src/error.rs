use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the action codec.
///
/// The `code()` strings are stable and travel over the wire protocol.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("non-finite action value {0}")]
    NonFinite(f64),
    #[error("action value {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("bin {bin} outside [0, {n_bins})")]
    BinOutOfRange { bin: u32, n_bins: u32 },
    #[error("non-action token {token}: expected a token in [{low}, {high})")]
    NonActionToken { token: i64, low: u32, high: u32 },
    #[error("truncated chunk: got {got} values, expected {expected}")]
    TruncatedChunk { got: usize, expected: usize },
    #[error("invalid codec config: {0}")]
    InvalidConfig(String),
    #[error("degenerate normalization statistics for dim {dim}: q_low {low} >= q_high {high}")]
    DegenerateStats { dim: usize, low: f64, high: f64 },
    #[error("cannot fit statistics on an empty action set")]
    EmptyInput,
}

impl CodecError {
    pub fn code(&self) -> &'static str {
        match self {
            CodecError::NonFinite(_) => "non_finite",
            CodecError::OutOfRange(_) => "out_of_range",
            CodecError::BinOutOfRange { .. } => "bin_out_of_range",
            CodecError::NonActionToken { .. } => "non_action_token",
            CodecError::TruncatedChunk { .. } => "truncated_chunk",
            CodecError::InvalidConfig(_) => "invalid_config",
            CodecError::DegenerateStats { .. } => "degenerate_stats",
            CodecError::EmptyInput => "empty_input",
        }
    }
}

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid instruction: {0}")]
    InvalidInstruction(String),
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error("image size mismatch: {0}")]
    ImageSize(String),
    #[error("unknown image {0}")]
    MissingImage(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),
    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        CoreError::Json {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
