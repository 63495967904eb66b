//! Interleaved prompt assembly: observation tokens first, then the
//! instruction's text and image blocks in their original order.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::instruction::{Instruction, Segment};
use crate::media::ImageId;

/// Size of the stub text vocabulary; ids fall in `[0, STUB_TEXT_VOCAB)`.
pub const STUB_TEXT_VOCAB: u32 = 32_000;

pub trait TextTokenizer {
    fn tokenize(&self, text: &str) -> Vec<u32>;
}

/// Splits on whitespace and hashes each word (FNV-1a) into the stub vocabulary.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

impl TextTokenizer for WhitespaceTokenizer {
    fn tokenize(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|word| {
                let mut h: u64 = 0xcbf2_9ce4_8422_2325;
                for b in word.bytes() {
                    h ^= u64::from(b);
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
                (h % u64::from(STUB_TEXT_VOCAB)) as u32
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PromptBlock {
    Obs { image: ImageId, count: usize },
    Img { image: ImageId, count: usize },
    Lang { tokens: Vec<u32> },
}

impl PromptBlock {
    pub fn token_count(&self) -> usize {
        match self {
            PromptBlock::Obs { count, .. } | PromptBlock::Img { count, .. } => *count,
            PromptBlock::Lang { tokens } => tokens.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentSequence {
    pub blocks: Vec<PromptBlock>,
}

impl SegmentSequence {
    pub fn total_tokens(&self) -> usize {
        self.blocks.iter().map(PromptBlock::token_count).sum()
    }

    /// Image blocks including the observation block.
    pub fn image_blocks(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| !matches!(b, PromptBlock::Lang { .. }))
            .count()
    }
}

/// Lays out `[Obs, (Lang | Img)*]` for one instruction. Text spans that
/// tokenize to nothing are dropped so every block has a positive count.
pub fn assemble_prompt(
    instruction: &Instruction,
    obs: &ImageId,
    tokenizer: &dyn TextTokenizer,
    patch_count: usize,
) -> Result<SegmentSequence> {
    if patch_count == 0 {
        return Err(CoreError::InvalidInstruction("patch_count must be positive".into()));
    }
    instruction.validate()?;
    let mut blocks = Vec::with_capacity(instruction.segments.len() + 1);
    blocks.push(PromptBlock::Obs {
        image: obs.clone(),
        count: patch_count,
    });
    for segment in &instruction.segments {
        match segment {
            Segment::Text(text) => {
                let tokens = tokenizer.tokenize(text);
                if !tokens.is_empty() {
                    blocks.push(PromptBlock::Lang { tokens });
                }
            }
            Segment::Image(id) => blocks.push(PromptBlock::Img {
                image: id.clone(),
                count: patch_count,
            }),
        }
    }
    Ok(SegmentSequence { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruction::{Form, VDL_PREFIX};

    fn id(n: u8) -> ImageId {
        ImageId::from_hex(format!("{:032x}", n)).unwrap()
    }

    #[test]
    fn stub_tokenizer_range_and_determinism() {
        let t = WhitespaceTokenizer;
        let a = t.tokenize("lift the red block");
        assert_eq!(a.len(), 4);
        assert_eq!(a, t.tokenize("  lift  the red\tblock "));
        assert!(a.iter().all(|&x| x < STUB_TEXT_VOCAB));
    }

    #[test]
    fn vdl_total_tokens() {
        let patch = (384 / 14) * (384 / 14);
        assert_eq!(patch, crate::DEFAULT_PATCH_COUNT);
        let inst = Instruction::vdl([id(1), id(2), id(3), id(4)]);
        let seq = assemble_prompt(&inst, &id(0), &WhitespaceTokenizer, patch).unwrap();
        assert_eq!(WhitespaceTokenizer.tokenize(VDL_PREFIX).len(), 5);
        assert_eq!(seq.total_tokens(), patch + 5 + 4 * patch);

        // Four images plus seven text tokens at 729 patches each.
        let padded = Instruction {
            form: Form::Vos,
            segments: vec![
                Segment::Text("a b c d e f g".into()),
                Segment::Image(id(1)),
                Segment::Image(id(2)),
                Segment::Image(id(3)),
                Segment::Image(id(4)),
            ],
        };
        let seq = assemble_prompt(&padded, &id(0), &WhitespaceTokenizer, patch).unwrap();
        assert_eq!(seq.total_tokens(), 3652);
    }

    #[test]
    fn lang_single_patch() {
        let inst = Instruction::lang("open the drawer right now");
        let seq = assemble_prompt(&inst, &id(0), &WhitespaceTokenizer, 1).unwrap();
        assert_eq!(seq.total_tokens(), 6);
        assert_eq!(seq.image_blocks(), 1);
    }

    #[test]
    fn vgr_has_obs_and_goal_blocks() {
        let seq = assemble_prompt(&Instruction::vgr(id(9)), &id(0), &WhitespaceTokenizer, 4).unwrap();
        assert_eq!(seq.image_blocks(), 2);
        assert!(matches!(seq.blocks[0], PromptBlock::Obs { .. }));
        assert!(matches!(seq.blocks.last(), Some(PromptBlock::Img { image, .. }) if *image == id(9)));
    }

    #[test]
    fn order_preserved_and_errors() {
        let inst = Instruction::new(
            Form::Vos,
            vec![
                Segment::Text("grasp the ".into()),
                Segment::Image(id(1)),
                Segment::Text(" and put it into ".into()),
                Segment::Image(id(2)),
            ],
        )
        .unwrap();
        let seq = assemble_prompt(&inst, &id(0), &WhitespaceTokenizer, 3).unwrap();
        let kinds: Vec<&str> = seq
            .blocks
            .iter()
            .map(|b| match b {
                PromptBlock::Obs { .. } => "obs",
                PromptBlock::Img { .. } => "img",
                PromptBlock::Lang { .. } => "lang",
            })
            .collect();
        assert_eq!(kinds, ["obs", "lang", "img", "lang", "img"]);
        assert!(assemble_prompt(&inst, &id(0), &WhitespaceTokenizer, 0).is_err());
        let broken = Instruction {
            form: Form::Oif,
            segments: vec![Segment::Text("x".into())],
        };
        assert!(assemble_prompt(&broken, &id(0), &WhitespaceTokenizer, 3).is_err());
    }
}
