use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const ACTION_DIM: usize = 7;
pub const GRIPPER_DIM: usize = 6;

/// One 7-DoF end-effector command: xyz translation deltas, three rotation
/// deltas and a binary gripper command (`-1` close, `+1` open).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action(pub [f64; ACTION_DIM]);

impl Action {
    pub const ZERO_OPEN: Action = Action([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn new(dims: [f64; ACTION_DIM]) -> Self {
        Action(dims)
    }

    pub fn translation(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn gripper(&self) -> f64 {
        self.0[GRIPPER_DIM]
    }

    /// True when every dim is in `[-1, 1]` and the gripper is exactly `±1`.
    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v))
            && (self.0[GRIPPER_DIM] == 1.0 || self.0[GRIPPER_DIM] == -1.0)
    }
}

impl Default for Action {
    fn default() -> Self {
        Action::ZERO_OPEN
    }
}

/// Environment variant. A–C are training scenes, D is the held-out one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvId {
    A,
    B,
    C,
    D,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [EnvId::A, EnvId::B, EnvId::C, EnvId::D];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EnvId::A => "A",
            EnvId::B => "B",
            EnvId::C => "C",
            EnvId::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for EnvId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(EnvId::A),
            "B" | "b" => Ok(EnvId::B),
            "C" | "c" => Ok(EnvId::C),
            "D" | "d" => Ok(EnvId::D),
            other => Err(format!("unknown environment `{other}` (expected A, B, C or D)")),
        }
    }
}

/// Gripper pose as seen by proprioception.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Proprio {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
    pub closed: bool,
}

impl Proprio {
    /// Flat 7-vector as sent over the wire: xyz, rotation, `1.0` when closed.
    pub fn to_array(&self) -> [f64; 7] {
        let p = self.position;
        let r = self.rotation;
        [p[0], p[1], p[2], r[0], r[1], r[2], if self.closed { 1.0 } else { 0.0 }]
    }

    pub fn from_array(a: &[f64]) -> Option<Self> {
        if a.len() != 7 {
            return None;
        }
        Some(Proprio {
            position: [a[0], a[1], a[2]],
            rotation: [a[3], a[4], a[5]],
            closed: a[6] > 0.5,
        })
    }
}

/// One recorded timestep: both camera views plus proprioception.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub static_view: Arc<RgbImage>,
    pub wrist_view: Arc<RgbImage>,
    pub proprio: Proprio,
    pub timestep: u32,
}

/// A mention of an object inside an annotation, as a byte span of the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSlot {
    pub start: usize,
    pub end: usize,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageAnnotation {
    pub text: String,
    #[serde(default)]
    pub object_slots: Vec<ObjectSlot>,
}

impl LanguageAnnotation {
    pub fn plain(text: impl Into<String>) -> Self {
        LanguageAnnotation {
            text: text.into(),
            object_slots: Vec::new(),
        }
    }

    /// Parses `{object_name:surface text}` markers, e.g.
    /// `"lift the {red_block:red block}"`.
    pub fn from_marked(marked: &str) -> Result<Self> {
        let mut text = String::with_capacity(marked.len());
        let mut slots = Vec::new();
        let mut rest = marked;
        while let Some(open) = rest.find('{') {
            text.push_str(&rest[..open]);
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| CoreError::InvalidInstruction(format!("unclosed slot marker in `{marked}`")))?
                + open;
            let inner = &rest[open + 1..close];
            let (object, surface) = inner
                .split_once(':')
                .ok_or_else(|| CoreError::InvalidInstruction(format!("slot `{inner}` lacks `object:text` form")))?;
            let start = text.len();
            text.push_str(surface);
            slots.push(ObjectSlot {
                start,
                end: text.len(),
                object: object.to_string(),
            });
            rest = &rest[close + 1..];
        }
        text.push_str(rest);
        let ann = LanguageAnnotation {
            text,
            object_slots: slots,
        };
        ann.validate()?;
        Ok(ann)
    }

    pub fn slot_text(&self, slot: &ObjectSlot) -> &str {
        &self.text[slot.start..slot.end]
    }

    /// Spans must be ordered, non-overlapping, non-empty and on char boundaries.
    pub fn validate(&self) -> Result<()> {
        let mut prev_end = 0;
        for slot in &self.object_slots {
            if slot.start >= slot.end
                || slot.end > self.text.len()
                || slot.start < prev_end
                || !self.text.is_char_boundary(slot.start)
                || !self.text.is_char_boundary(slot.end)
            {
                return Err(CoreError::InvalidInstruction(format!(
                    "bad object slot {}..{} for `{}` in `{}`",
                    slot.start, slot.end, slot.object, self.text
                )));
            }
            prev_end = slot.end;
        }
        Ok(())
    }

    pub fn validate_registry(&self, registry: &[&str]) -> Result<()> {
        self.validate()?;
        for slot in &self.object_slots {
            if !registry.contains(&slot.object.as_str()) {
                return Err(CoreError::InvalidInstruction(format!(
                    "object `{}` is not in the registry",
                    slot.object
                )));
            }
        }
        Ok(())
    }
}

/// A recorded trajectory with its language annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub id: String,
    pub env_id: EnvId,
    pub frames: Vec<Frame>,
    pub actions: Vec<Action>,
    pub annotation: LanguageAnnotation,
}

impl Episode {
    pub fn new(
        id: impl Into<String>,
        env_id: EnvId,
        frames: Vec<Frame>,
        actions: Vec<Action>,
        annotation: LanguageAnnotation,
    ) -> Result<Self> {
        let ep = Episode {
            id: id.into(),
            env_id,
            frames,
            actions,
            annotation,
        };
        ep.validate()?;
        Ok(ep)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(CoreError::InvalidEpisode(format!("episode {} has no frames", self.id)));
        }
        if self.actions.len() + 1 != self.frames.len() {
            return Err(CoreError::InvalidEpisode(format!(
                "episode {}: {} actions for {} frames",
                self.id,
                self.actions.len(),
                self.frames.len()
            )));
        }
        for w in self.frames.windows(2) {
            if w[1].timestep <= w[0].timestep {
                return Err(CoreError::InvalidEpisode(format!(
                    "episode {}: timestep {} follows {}",
                    self.id, w[1].timestep, w[0].timestep
                )));
            }
        }
        self.annotation.validate()
    }
}
