use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::media::ImageId;

pub const OIF_PREFIX: &str = "follow the command in ";
pub const VGR_PREFIX: &str = "reach the goal state in ";
pub const VDL_PREFIX: &str = "perform the demonstrated actions in ";
pub const VDL_FRAMES: usize = 4;

/// The instruction modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Form {
    /// Plain language.
    Lang,
    /// Visual object specification: object mentions replaced by snapshots.
    Vos,
    /// Optical instruction following: the command rendered as an image.
    Oif,
    /// Visual goal reaching: a single goal-state image.
    Vgr,
    /// Video demonstration: four frames sampled from a demonstration.
    Vdl,
}

impl Form {
    pub const ALL: [Form; 5] = [Form::Lang, Form::Vos, Form::Oif, Form::Vgr, Form::Vdl];

    pub fn as_str(self) -> &'static str {
        match self {
            Form::Lang => "LANG",
            Form::Vos => "VOS",
            Form::Oif => "OIF",
            Form::Vgr => "VGR",
            Form::Vdl => "VDL",
        }
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Form {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "LANG" => Ok(Form::Lang),
            "VOS" => Ok(Form::Vos),
            "OIF" => Ok(Form::Oif),
            "VGR" => Ok(Form::Vgr),
            "VDL" => Ok(Form::Vdl),
            _ => Err(format!("unknown instruction form `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Text(String),
    Image(ImageId),
}

/// An interleaved text/image instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub form: Form,
    pub segments: Vec<Segment>,
}

impl Instruction {
    pub fn new(form: Form, segments: Vec<Segment>) -> Result<Self> {
        let inst = Instruction { form, segments };
        inst.validate()?;
        Ok(inst)
    }

    pub fn lang(text: impl Into<String>) -> Self {
        Instruction {
            form: Form::Lang,
            segments: vec![Segment::Text(text.into())],
        }
    }

    pub fn oif(rendered: ImageId) -> Self {
        Instruction {
            form: Form::Oif,
            segments: vec![Segment::Text(OIF_PREFIX.into()), Segment::Image(rendered)],
        }
    }

    pub fn vgr(goal: ImageId) -> Self {
        Instruction {
            form: Form::Vgr,
            segments: vec![Segment::Text(VGR_PREFIX.into()), Segment::Image(goal)],
        }
    }

    pub fn vdl(frames: [ImageId; VDL_FRAMES]) -> Self {
        let mut segments = vec![Segment::Text(VDL_PREFIX.into())];
        segments.extend(frames.into_iter().map(Segment::Image));
        Instruction {
            form: Form::Vdl,
            segments,
        }
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &ImageId> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Image(id) => Some(id),
            Segment::Text(_) => None,
        })
    }

    pub fn image_count(&self) -> usize {
        self.image_ids().count()
    }

    /// Concatenated text spans, images omitted.
    pub fn text(&self) -> String {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Text(t) => Some(t.as_str()),
                Segment::Image(_) => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::InvalidInstruction(format!("{}: {msg}", self.form)));
        if self.segments.is_empty() {
            return bad("no segments".into());
        }
        for pair in self.segments.windows(2) {
            if matches!(pair, [Segment::Text(_), Segment::Text(_)]) {
                return bad("adjacent text segments".into());
            }
        }
        if self
            .segments
            .iter()
            .any(|s| matches!(s, Segment::Text(t) if t.is_empty()))
        {
            return bad("empty text segment".into());
        }
        let images = self.image_count();
        let expected_prefix = match self.form {
            Form::Lang => {
                if images != 0 {
                    return bad(format!("{images} images, expected 0"));
                }
                return Ok(());
            }
            Form::Vos => {
                if images == 0 {
                    return bad("no images".into());
                }
                return Ok(());
            }
            Form::Oif => OIF_PREFIX,
            Form::Vgr => VGR_PREFIX,
            Form::Vdl => VDL_PREFIX,
        };
        let want_images = if self.form == Form::Vdl { VDL_FRAMES } else { 1 };
        if images != want_images {
            return bad(format!("{images} images, expected {want_images}"));
        }
        match &self.segments[0] {
            Segment::Text(t) if t == expected_prefix => {}
            _ => return bad(format!("must start with text `{expected_prefix}`")),
        }
        if self.segments.len() != 1 + want_images {
            return bad("images must directly follow the template text".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(n: u8) -> ImageId {
        ImageId::from_hex(format!("{:032x}", n)).unwrap()
    }

    #[test]
    fn image_counts_per_form() {
        assert!(Instruction::lang("open the drawer").validate().is_ok());
        assert!(Instruction::oif(id(1)).validate().is_ok());
        assert!(Instruction::vgr(id(1)).validate().is_ok());
        assert!(Instruction::vdl([id(1), id(2), id(3), id(4)]).validate().is_ok());

        let lang_with_img = Instruction {
            form: Form::Lang,
            segments: vec![Segment::Text("x ".into()), Segment::Image(id(1))],
        };
        assert!(lang_with_img.validate().is_err());

        let vdl_three = Instruction {
            form: Form::Vdl,
            segments: vec![
                Segment::Text(VDL_PREFIX.into()),
                Segment::Image(id(1)),
                Segment::Image(id(2)),
                Segment::Image(id(3)),
            ],
        };
        assert!(vdl_three.validate().is_err());

        let vos_none = Instruction {
            form: Form::Vos,
            segments: vec![Segment::Text("lift the block".into())],
        };
        assert!(vos_none.validate().is_err());

        let vgr_two = Instruction {
            form: Form::Vgr,
            segments: vec![
                Segment::Text(VGR_PREFIX.into()),
                Segment::Image(id(1)),
                Segment::Image(id(2)),
            ],
        };
        assert!(vgr_two.validate().is_err());
    }

    #[test]
    fn vos_allows_interleaving() {
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
        assert_eq!(inst.image_count(), 2);
        assert_eq!(inst.text(), "grasp the  and put it into ");
    }

    #[test]
    fn serde_shape() {
        let inst = Instruction::oif(id(7));
        let json = serde_json::to_string(&inst).unwrap();
        assert_eq!(
            json,
            format!(
                r#"{{"form":"OIF","segments":[{{"text":"{OIF_PREFIX}"}},{{"image":"{}"}}]}}"#,
                id(7)
            )
        );
        let back: Instruction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
    }
}
