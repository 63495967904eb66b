//! On-disk episode archive.
//!
//! ```text
//! <root>/<episode id>/meta.json
//! <root>/<episode id>/frames/000000_static.png
//! <root>/<episode id>/frames/000000_wrist.png
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::media::{read_png, write_png};
use crate::types::{Action, EnvId, Episode, Frame, LanguageAnnotation, Proprio};

pub const META_FILE: &str = "meta.json";
pub const FRAMES_DIR: &str = "frames";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub timestep: u32,
    pub proprio: Proprio,
}

/// Everything in an episode except pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub id: String,
    pub env_id: EnvId,
    pub annotation: LanguageAnnotation,
    pub actions: Vec<Action>,
    pub frames: Vec<FrameMeta>,
    /// Free-form provenance (generator seed, task list, ...).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub provenance: serde_json::Value,
}

impl EpisodeMeta {
    pub fn of(ep: &Episode, provenance: serde_json::Value) -> Self {
        EpisodeMeta {
            id: ep.id.clone(),
            env_id: ep.env_id,
            annotation: ep.annotation.clone(),
            actions: ep.actions.clone(),
            frames: ep
                .frames
                .iter()
                .map(|f| FrameMeta {
                    timestep: f.timestep,
                    proprio: f.proprio,
                })
                .collect(),
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn frame_path(dir: &Path, index: usize, view: &str) -> PathBuf {
    dir.join(FRAMES_DIR).join(format!("{index:06}_{view}.png"))
}

/// Writes the episode under `root/<id>`, staging in a sibling temp directory
/// and renaming so readers never observe a half-written episode.
pub fn write_episode(root: &Path, ep: &Episode, provenance: serde_json::Value) -> Result<PathBuf> {
    ep.validate()?;
    let final_dir = root.join(&ep.id);
    let staging = root.join(format!(".{}.partial", ep.id));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| CoreError::io(&staging, e))?;
    }
    fs::create_dir_all(staging.join(FRAMES_DIR)).map_err(|e| CoreError::io(&staging, e))?;
    let meta = EpisodeMeta::of(ep, provenance);
    write_json(&staging.join(META_FILE), &meta)?;
    for (i, frame) in ep.frames.iter().enumerate() {
        write_png(&frame_path(&staging, i, "static"), &frame.static_view)?;
        write_png(&frame_path(&staging, i, "wrist"), &frame.wrist_view)?;
    }
    if final_dir.exists() {
        fs::remove_dir_all(&final_dir).map_err(|e| CoreError::io(&final_dir, e))?;
    }
    fs::rename(&staging, &final_dir).map_err(|e| CoreError::io(&final_dir, e))?;
    Ok(final_dir)
}

pub fn read_meta(dir: &Path) -> Result<EpisodeMeta> {
    read_json(&dir.join(META_FILE))
}

pub fn read_episode(dir: &Path) -> Result<Episode> {
    let meta = read_meta(dir)?;
    let mut frames = Vec::with_capacity(meta.frames.len());
    for (i, fm) in meta.frames.iter().enumerate() {
        frames.push(Frame {
            static_view: Arc::new(read_png(&frame_path(dir, i, "static"))?),
            wrist_view: Arc::new(read_png(&frame_path(dir, i, "wrist"))?),
            proprio: fm.proprio,
            timestep: fm.timestep,
        });
    }
    Episode::new(meta.id, meta.env_id, frames, meta.actions, meta.annotation)
}

/// Episode directories under `root`, sorted by name.
pub fn list_episodes(root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| CoreError::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(META_FILE).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CoreError::json(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CoreError::json(path, e))
}

/// Write-to-temp then rename within the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| CoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CoreError::io(path, e))
}
