use oevla_core::{CodecError, CoreError};
use oevla_forge::ForgeError;
use oevla_sim::{PolicyError, RenderError, TaskId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("missing resource: {0}")]
    MissingResource(String),
    #[error("oracle could not complete {task} in sequence {sequence}")]
    OracleStalled { task: TaskId, sequence: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no rollout logs to score")]
    EmptyLogs,
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
