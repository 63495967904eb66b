//! Core domain types for open-ended instruction datasets and evaluation.
//!
//! Everything downstream (simulator, dataset forge, benchmark, harness, wire
//! protocol) speaks in the types defined here: [`Action`], [`Frame`],
//! [`Episode`], [`Instruction`] and the [`codec::ActionCodec`] that maps
//! 5×7 action chunks onto the reserved tail of a language vocabulary.

pub mod archive;
pub mod codec;
pub mod error;
pub mod instruction;
pub mod media;
pub mod prompt;
pub mod sample;
pub mod types;

pub use codec::{ActionChunk, ActionCodec, CodecConfig, NormStats};
pub use error::{CodecError, CoreError};
pub use instruction::{Form, Instruction, Segment, VDL_FRAMES};
pub use media::{concat_views, ImageId, MediaStore};
pub use prompt::{assemble_prompt, PromptBlock, SegmentSequence, TextTokenizer, WhitespaceTokenizer};
pub use sample::TrainingSample;
pub use types::{Action, EnvId, Episode, Frame, LanguageAnnotation, ObjectSlot, Proprio};

/// Default visual token count per image: `floor(384 / 14)^2`.
pub const DEFAULT_PATCH_COUNT: usize = 729;
