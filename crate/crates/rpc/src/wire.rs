//! Message schema and image encoding for `oe-vla-rpc/1`.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use image::RgbImage;
use oevla_core::media::{decode_png, encode_png};
use oevla_core::{CodecConfig, Form, ImageId, Instruction, MediaStore, Segment};
use oevla_sim::{TaskId, WorldState};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RpcError};

pub const PROTOCOL_VERSION: &str = "oe-vla-rpc/1";

/// A PNG image plus the content hash of its pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireImage {
    pub id: String,
    pub png: String,
}

impl WireImage {
    pub fn encode(img: &RgbImage) -> Self {
        WireImage {
            id: ImageId::of(img).to_string(),
            png: B64.encode(encode_png(img)),
        }
    }

    /// Decodes and checks the pixels against `id`.
    pub fn decode(&self) -> Result<(ImageId, RgbImage)> {
        let bytes = B64
            .decode(self.png.as_bytes())
            .map_err(|e| RpcError::Image(format!("base64: {e}")))?;
        let img = decode_png(&bytes).map_err(|e| RpcError::Image(e.to_string()))?;
        let id = ImageId::of(&img);
        if id.as_str() != self.id {
            return Err(RpcError::Image(format!(
                "content hash {id} does not match declared {}",
                self.id
            )));
        }
        Ok((id, img))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireSegment {
    Text(String),
    Image(WireImage),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Hello {
        version: String,
        codec_hash: String,
        codec: CodecConfig,
    },
    /// A new subtask; never acknowledged.
    Reset {
        sequence_id: String,
        subtask_index: usize,
        form: Form,
        segments: Vec<WireSegment>,
        /// Ground-truth task, sent only to privileged policies.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        task: Option<TaskId>,
    },
    Step {
        step_index: usize,
        obs: WireImage,
        proprio: [f64; 7],
        /// Full simulator state, sent only to privileged policies.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        state: Option<Box<WorldState>>,
    },
    Act {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tokens: Option<Vec<i64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chunk: Option<Vec<f64>>,
    },
    Error {
        code: String,
        message: String,
    },
    Bye {},
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Reset { .. } => "reset",
            Message::Step { .. } => "step",
            Message::Act { .. } => "act",
            Message::Error { .. } => "error",
            Message::Bye {} => "bye",
        }
    }

    pub fn hello(codec: &CodecConfig) -> Self {
        Message::Hello {
            version: PROTOCOL_VERSION.into(),
            codec_hash: codec.hash(),
            codec: *codec,
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Message::Error {
            code: code.into(),
            message: message.into(),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages always serialize");
        s.push('\n');
        s
    }

    pub fn from_line(line: &str) -> Result<Self> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| RpcError::Malformed(e.to_string()))
    }
}

/// Checks a peer's hello against our version and codec.
pub fn check_hello(msg: &Message, codec: &CodecConfig) -> Result<()> {
    match msg {
        Message::Hello {
            version, codec_hash, ..
        } => {
            if version != PROTOCOL_VERSION {
                return Err(RpcError::VersionMismatch {
                    expected: PROTOCOL_VERSION.into(),
                    got: version.clone(),
                });
            }
            let ours = codec.hash();
            if *codec_hash != ours {
                return Err(RpcError::CodecMismatch {
                    expected: ours,
                    got: codec_hash.clone(),
                });
            }
            Ok(())
        }
        Message::Error { code, message } => Err(RpcError::Peer {
            code: code.clone(),
            message: message.clone(),
        }),
        other => Err(RpcError::Unexpected {
            expected: "hello",
            got: other.kind().into(),
        }),
    }
}

pub fn encode_instruction(inst: &Instruction, media: &MediaStore) -> Result<Vec<WireSegment>> {
    inst.segments
        .iter()
        .map(|s| match s {
            Segment::Text(t) => Ok(WireSegment::Text(t.clone())),
            Segment::Image(id) => {
                let img = media.get(id).map_err(|e| RpcError::Image(e.to_string()))?;
                Ok(WireSegment::Image(WireImage::encode(img)))
            }
        })
        .collect()
}

/// Rebuilds an instruction and the store holding its pixels.
pub fn decode_instruction(form: Form, segments: &[WireSegment]) -> Result<(Instruction, MediaStore)> {
    let mut media = MediaStore::new();
    let mut out = Vec::with_capacity(segments.len());
    for s in segments {
        out.push(match s {
            WireSegment::Text(t) => Segment::Text(t.clone()),
            WireSegment::Image(w) => {
                let (_, img) = w.decode()?;
                Segment::Image(media.insert(img))
            }
        });
    }
    let inst = Instruction::new(form, out).map_err(|e| RpcError::Malformed(e.to_string()))?;
    Ok((inst, media))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_round_trip() {
        let msgs = [
            Message::hello(&CodecConfig::default()),
            Message::Act {
                tokens: Some(vec![151808; 35]),
                chunk: None,
            },
            Message::error("truncated_chunk", "got 34"),
            Message::Bye {},
        ];
        for m in msgs {
            let line = m.to_line();
            assert!(line.ends_with('\n') && !line[..line.len() - 1].contains('\n'));
            assert_eq!(Message::from_line(&line).unwrap(), m);
        }
        assert_eq!(Message::Bye {}.to_line(), "{\"type\":\"bye\"}\n");
        assert!(Message::from_line("{\"type\":\"warp\"}").is_err());
    }

    #[test]
    fn hello_checks() {
        let c = CodecConfig::default();
        check_hello(&Message::hello(&c), &c).unwrap();
        let bad = Message::Hello {
            version: "oe-vla-rpc/0".into(),
            codec_hash: c.hash(),
            codec: c,
        };
        assert_eq!(check_hello(&bad, &c).unwrap_err().code(), "version_mismatch");
        let other = CodecConfig { n_bins: 128, ..c };
        assert_eq!(
            check_hello(&Message::hello(&other), &c).unwrap_err().code(),
            "codec_mismatch"
        );
        assert_eq!(
            check_hello(&Message::Bye {}, &c).unwrap_err().code(),
            "unexpected_message"
        );
    }

    #[test]
    fn images_are_checked() {
        let img = RgbImage::from_fn(5, 3, |x, y| image::Rgb([x as u8 * 40, y as u8 * 80, 7]));
        let w = WireImage::encode(&img);
        assert_eq!(w.decode().unwrap().1, img);
        let mut forged = w.clone();
        forged.id = "0".repeat(32);
        assert_eq!(forged.decode().unwrap_err().code(), "bad_image");
    }
}
