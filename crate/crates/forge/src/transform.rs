//! Per-episode builders for the five instruction forms.
//!
//! LANG, VOS, OIF and VDL pair their instruction with every 5-step chunk
//! boundary of the episode. VGR cuts fixed-length windows and supervises
//! the first chunk of each window.

use oevla_core::{
    concat_views, Action, ActionChunk, ActionCodec, Episode, Form, Instruction, LanguageAnnotation, MediaStore,
    NormStats, Segment, TrainingSample, VDL_FRAMES,
};
use rand::Rng;

use crate::detect::CropDb;
use crate::error::{ForgeError, Result};
use crate::font::{render_text_image, TextStyle};

pub const VGR_SEGMENT_LEN: usize = 80;
pub const VGR_STRIDE: usize = 40;

/// Codec and normalization used to turn raw actions into target tokens.
#[derive(Debug, Clone)]
pub struct TargetEncoder {
    pub codec: ActionCodec,
    pub stats: NormStats,
}

impl TargetEncoder {
    /// The 35 target tokens for the chunk starting at action `t`. Past the
    /// end of the episode the chunk is padded with motionless actions that
    /// keep the last gripper command.
    pub fn tokens(&self, ep: &Episode, t: usize) -> Result<Vec<u32>> {
        let cfg = self.codec.config();
        let last_grip = ep.actions.last().map_or(1.0, |a| if a.0[6] < 0.0 { -1.0 } else { 1.0 });
        let mut pad = Action::ZERO_OPEN;
        pad.0[6] = last_grip;
        let actions: Vec<Action> = (t..t + cfg.chunk_len)
            .map(|i| ep.actions.get(i).map_or(pad, |a| self.stats.normalize(a)))
            .collect();
        Ok(self.codec.encode_chunk(&ActionChunk::new(actions))?)
    }
}

/// Action indices at which chunks start: 0, 5, 10, ... while actions remain.
pub fn chunk_starts(ep: &Episode, chunk_len: usize) -> Vec<usize> {
    (0..ep.actions.len()).step_by(chunk_len.max(1)).collect()
}

fn obs_id(ep: &Episode, t: usize, media: &mut MediaStore) -> Result<oevla_core::ImageId> {
    let f = &ep.frames[t];
    Ok(media.insert(concat_views(&f.static_view, &f.wrist_view)?))
}

fn samples_over_chunks(
    ep: &Episode,
    form: Form,
    enc: &TargetEncoder,
    media: &mut MediaStore,
    mut instruction_at: impl FnMut(usize, &mut MediaStore) -> Result<Instruction>,
) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for t in chunk_starts(ep, enc.codec.config().chunk_len) {
        let instruction = instruction_at(t, media)?;
        instruction.validate()?;
        out.push(TrainingSample {
            id: format!("{}-{}-t{t:04}", form.as_str().to_ascii_lowercase(), ep.id),
            episode_id: ep.id.clone(),
            timestep: ep.frames[t].timestep,
            obs: obs_id(ep, t, media)?,
            instruction,
            target: enc.tokens(ep, t)?,
        });
    }
    Ok(out)
}

pub fn make_lang(ep: &Episode, enc: &TargetEncoder, media: &mut MediaStore) -> Result<Vec<TrainingSample>> {
    let instruction = Instruction::lang(ep.annotation.text.clone());
    samples_over_chunks(ep, Form::Lang, enc, media, |_, _| Ok(instruction.clone()))
}

/// Replaces each object slot of `ann` with a crop drawn uniformly from `db`.
pub fn vos_instruction(
    ann: &LanguageAnnotation,
    db: &CropDb,
    rng: &mut impl Rng,
    media: &mut MediaStore,
) -> Result<Instruction> {
    if ann.object_slots.is_empty() {
        return Err(ForgeError::NoSlots(ann.text.clone()));
    }
    let mut segments = Vec::new();
    let mut cursor = 0;
    for slot in &ann.object_slots {
        if slot.start > cursor {
            segments.push(Segment::Text(ann.text[cursor..slot.start].to_string()));
        }
        let entry = db.draw(&slot.object, rng)?;
        media.insert_arc(db.image(&entry.image)?.clone());
        segments.push(Segment::Image(entry.image.clone()));
        cursor = slot.end;
    }
    if cursor < ann.text.len() {
        segments.push(Segment::Text(ann.text[cursor..].to_string()));
    }
    Ok(Instruction::new(Form::Vos, segments)?)
}

pub fn make_vos(
    ep: &Episode,
    db: &CropDb,
    enc: &TargetEncoder,
    media: &mut MediaStore,
    rng: &mut impl Rng,
) -> Result<Vec<TrainingSample>> {
    db.require(ep.annotation.object_slots.iter().map(|s| s.object.as_str()))?;
    samples_over_chunks(ep, Form::Vos, enc, media, |_, media| {
        vos_instruction(&ep.annotation, db, rng, media)
    })
}

/// "follow the command in <img>" with `text` rendered into the image.
pub fn oif_instruction(text: &str, style: &TextStyle, seed: u64, media: &mut MediaStore) -> Result<Instruction> {
    let img = render_text_image(text, style, seed)?;
    Ok(Instruction::oif(media.insert(img)))
}

/// One rendered command image per episode, shared by its samples.
pub fn make_oif(
    ep: &Episode,
    style: &TextStyle,
    seed: u64,
    enc: &TargetEncoder,
    media: &mut MediaStore,
) -> Result<Vec<TrainingSample>> {
    let instruction = oif_instruction(&ep.annotation.text, style, seed, media)?;
    samples_over_chunks(ep, Form::Oif, enc, media, |_, _| Ok(instruction.clone()))
}

/// `round(i (T - 1) / 3)` for `i = 0..4`, or `None` when `T < 4`.
pub fn vdl_indices(len: usize) -> Option<[usize; VDL_FRAMES]> {
    if len < VDL_FRAMES {
        return None;
    }
    let span = (len - 1) as u64;
    let d = (VDL_FRAMES - 1) as u64;
    // integer round-half-up of i * span / d
    Some(std::array::from_fn(|i| ((2 * i as u64 * span + d) / (2 * d)) as usize))
}

pub fn vdl_instruction(ep: &Episode, media: &mut MediaStore) -> Option<Instruction> {
    let idx = vdl_indices(ep.len())?;
    Some(Instruction::vdl(
        idx.map(|i| media.insert_arc(ep.frames[i].static_view.clone())),
    ))
}

/// Empty (with a warning) for episodes shorter than four frames.
pub fn make_vdl(ep: &Episode, enc: &TargetEncoder, media: &mut MediaStore) -> Result<Vec<TrainingSample>> {
    let Some(instruction) = vdl_instruction(ep, media) else {
        log::warn!("episode {} has {} frames; skipping VDL", ep.id, ep.len());
        return Ok(Vec::new());
    };
    samples_over_chunks(ep, Form::Vdl, enc, media, |_, _| Ok(instruction.clone()))
}

/// Window starts `0, stride, 2 stride, ...` with `s + seg_len <= len`.
pub fn vgr_window_starts(len: usize, seg_len: usize, stride: usize) -> Vec<usize> {
    if seg_len < 2 || stride == 0 || len < seg_len {
        return Vec::new();
    }
    (0..=len - seg_len).step_by(stride).collect()
}

/// One sample per window: obs at the window's first frame, goal at its last.
pub fn extract_vgr_segments(
    ep: &Episode,
    seg_len: usize,
    stride: usize,
    enc: &TargetEncoder,
    media: &mut MediaStore,
) -> Result<Vec<TrainingSample>> {
    if seg_len < 2 {
        return Err(ForgeError::Config(format!("VGR segment length {seg_len} < 2")));
    }
    let mut out = Vec::new();
    for s in vgr_window_starts(ep.len(), seg_len, stride) {
        let goal = media.insert_arc(ep.frames[s + seg_len - 1].static_view.clone());
        out.push(TrainingSample {
            id: format!("vgr-{}-s{s:04}", ep.id),
            episode_id: ep.id.clone(),
            timestep: ep.frames[s].timestep,
            obs: obs_id(ep, s, media)?,
            instruction: Instruction::vgr(goal),
            target: enc.tokens(ep, s)?,
        });
    }
    Ok(out)
}
