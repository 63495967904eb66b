//! Oracle-generated demonstration episodes, the stand-in for teleoperated data.
//!
//! Each episode chains a few randomly chosen feasible tasks, executed by the
//! scripted oracle one step at a time, and records both camera views at
//! every step. Ground-truth detections for frame 0 are stored next to the
//! episode for crop extraction.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use oevla_core::archive::{write_episode, write_json};
use oevla_core::{Action, EnvId, Episode, Frame, LanguageAnnotation};
use oevla_sim::policy::oracle_step;
use oevla_sim::render::{object_bbox_with, render_with};
use oevla_sim::{derive_seed, feasible_tasks, reset, step, success, EnvProfile, SceneObject, TaskId, View, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::{Detection, EpisodeDetections, DETECTIONS_FILE};
use crate::error::{ForgeError, Result};

pub const DEMO_CONFIG_FILE: &str = "demos.json";
/// Step budget per task inside a demo; the oracle needs far fewer.
const TASK_BUDGET: usize = 64;

pub const DEFAULT_TASKS_PER_EPISODE: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub envs: Vec<EnvId>,
    pub n: usize,
    pub seed: u64,
    /// Tasks chained per episode. Seven keeps about 95% of episodes at 80
    /// frames or more, long enough for a VGR window.
    pub tasks_per_episode: usize,
    pub resolution: u32,
}

impl DemoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.envs.is_empty() {
            return Err(ForgeError::Config("at least one environment is required".into()));
        }
        if self.tasks_per_episode == 0 {
            return Err(ForgeError::Config("tasks_per_episode must be positive".into()));
        }
        Ok(())
    }

    pub fn episode_id(index: usize) -> String {
        format!("ep{index:06}")
    }
}

#[derive(Debug, Clone)]
pub struct Demo {
    pub episode: Episode,
    pub tasks: Vec<TaskId>,
    pub reset_seed: u64,
    pub detections: EpisodeDetections,
}

fn frame(state: &WorldState, profile: &EnvProfile, res: u32, t: u32) -> Result<Frame> {
    Ok(Frame {
        static_view: Arc::new(render_with(state, profile, View::Static, res)?),
        wrist_view: Arc::new(render_with(state, profile, View::Wrist, res)?),
        proprio: state.proprio(),
        timestep: t,
    })
}

/// Static-view boxes of every visible object.
pub fn ground_truth_boxes(state: &WorldState, res: u32, frame: usize) -> Vec<Detection> {
    SceneObject::ALL
        .into_iter()
        .filter_map(|obj| {
            object_bbox_with(state, state.profile(), obj, View::Static, res)
                .ok()
                .map(|bbox| Detection {
                    frame,
                    object: obj.name().to_string(),
                    bbox,
                })
        })
        .collect()
}

/// Generates demo `index`; the result depends only on `(cfg, index)`.
pub fn generate_demo(cfg: &DemoConfig, index: usize) -> Result<Demo> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "demo", index as u64));
    let env = cfg.envs[index % cfg.envs.len()];
    let profile = EnvProfile::get(env);
    let reset_seed: u64 = rng.gen();
    let mut state = reset(profile, reset_seed);

    let detections = EpisodeDetections {
        episode_id: DemoConfig::episode_id(index),
        resolution: cfg.resolution,
        boxes: ground_truth_boxes(&state, cfg.resolution, 0),
    };
    let mut frames = vec![frame(&state, profile, cfg.resolution, 0)?];
    let mut actions: Vec<Action> = Vec::new();
    let mut tasks: Vec<TaskId> = Vec::new();
    let mut marked: Vec<String> = Vec::new();

    for _ in 0..cfg.tasks_per_episode {
        let candidates: Vec<TaskId> = feasible_tasks(&state)
            .into_iter()
            .filter(|t| tasks.last() != Some(t))
            .collect();
        let task = candidates[rng.gen_range(0..candidates.len())];
        marked.push(task.marked_template(&state));
        let initial = state.clone();
        let mut used = 0;
        while !success(task, &initial, &state) {
            if used == TASK_BUDGET {
                return Err(ForgeError::DemoStalled {
                    task,
                    budget: TASK_BUDGET,
                    episode: index,
                });
            }
            let a = oracle_step(&state, task)?;
            state = step(&state, &a);
            actions.push(a);
            frames.push(frame(&state, profile, cfg.resolution, frames.len() as u32)?);
            used += 1;
        }
        tasks.push(task);
    }

    let annotation = LanguageAnnotation::from_marked(&marked.join(", then "))?;
    let episode = Episode::new(DemoConfig::episode_id(index), env, frames, actions, annotation)?;
    Ok(Demo {
        episode,
        tasks,
        reset_seed,
        detections,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoArchiveInfo {
    pub generator: String,
    pub config: DemoConfig,
    pub episodes: usize,
    pub frames: usize,
}

/// Generates and writes `cfg.n` episodes under `root` using `workers` threads.
pub fn write_demos(root: &Path, cfg: &DemoConfig, workers: usize) -> Result<DemoArchiveInfo> {
    cfg.validate()?;
    std::fs::create_dir_all(root).map_err(|e| ForgeError::Input {
        path: root.to_path_buf(),
        message: e.to_string(),
    })?;
    let next = AtomicUsize::new(0);
    let frames = AtomicUsize::new(0);
    let first_error: Mutex<Option<(usize, ForgeError)>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cfg.n || first_error.lock().expect("lock").is_some() {
                    break;
                }
                let result = generate_demo(cfg, i).and_then(|demo| {
                    let provenance = serde_json::json!({
                        "generator": "oracle-demo",
                        "seed": cfg.seed,
                        "index": i,
                        "reset_seed": demo.reset_seed,
                        "tasks": demo.tasks,
                    });
                    let dir = write_episode(root, &demo.episode, provenance)?;
                    write_json(&dir.join(DETECTIONS_FILE), &demo.detections)?;
                    frames.fetch_add(demo.episode.len(), Ordering::Relaxed);
                    Ok(())
                });
                if let Err(e) = result {
                    let mut slot = first_error.lock().expect("lock");
                    if slot.as_ref().is_none_or(|(j, _)| i < *j) {
                        *slot = Some((i, e));
                    }
                }
            });
        }
    });
    if let Some((_, e)) = first_error.into_inner().expect("lock") {
        return Err(e);
    }
    let info = DemoArchiveInfo {
        generator: "oracle-demo".into(),
        config: cfg.clone(),
        episodes: cfg.n,
        frames: frames.into_inner(),
    };
    write_json(&root.join(DEMO_CONFIG_FILE), &info)?;
    Ok(info)
}
