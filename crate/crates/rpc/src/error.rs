use std::io;

use oevla_sim::PolicyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RpcError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("no message within {0:?}")]
    Timeout(std::time::Duration),
    #[error("peer closed the connection")]
    Closed,
    #[error("protocol version mismatch: expected {expected}, peer sent {got}")]
    VersionMismatch { expected: String, got: String },
    #[error("codec hash mismatch: expected {expected}, peer sent {got}")]
    CodecMismatch { expected: String, got: String },
    #[error("unexpected `{got}` message while waiting for {expected}")]
    Unexpected { expected: &'static str, got: String },
    #[error("peer error {code}: {message}")]
    Peer { code: String, message: String },
    #[error("bad image: {0}")]
    Image(String),
    #[error("bad endpoint `{0}`")]
    Endpoint(String),
}

impl RpcError {
    /// Wire error code for this failure.
    pub fn code(&self) -> &str {
        match self {
            RpcError::Io(_) | RpcError::Closed => "transport",
            RpcError::Malformed(_) => "malformed_message",
            RpcError::Timeout(_) => "timeout",
            RpcError::VersionMismatch { .. } => "version_mismatch",
            RpcError::CodecMismatch { .. } => "codec_mismatch",
            RpcError::Unexpected { .. } => "unexpected_message",
            RpcError::Peer { code, .. } => code,
            RpcError::Image(_) => "bad_image",
            RpcError::Endpoint(_) => "bad_endpoint",
        }
    }
}

impl From<RpcError> for PolicyError {
    fn from(e: RpcError) -> Self {
        match e {
            RpcError::Timeout(_) => PolicyError::Timeout,
            RpcError::Io(_) | RpcError::Closed => PolicyError::Transport(e.to_string()),
            RpcError::Peer { code, message } => PolicyError::Protocol { code, message },
            other => PolicyError::Protocol {
                code: other.code().to_string(),
                message: other.to_string(),
            },
        }
    }
}

pub type Result<T, E = RpcError> = std::result::Result<T, E>;
