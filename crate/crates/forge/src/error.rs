use std::path::PathBuf;

use oevla_core::{CodecError, CoreError};
use oevla_sim::{PolicyError, RenderError, TaskId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("no crops for: {}", .0.join(", "))]
    MissingCrops(Vec<String>),
    #[error("annotation `{0}` has no object slots")]
    NoSlots(String),
    #[error("text does not fit a {width}x{height} canvas at scale {scale}: `{text}`")]
    TextTooLong {
        text: String,
        width: u32,
        height: u32,
        scale: u32,
    },
    #[error("cannot render text: {0}")]
    BadText(String),
    #[error("oracle did not finish {task} within {budget} steps (episode {episode})")]
    DemoStalled {
        task: TaskId,
        budget: usize,
        episode: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

pub type Result<T, E = ForgeError> = std::result::Result<T, E>;
