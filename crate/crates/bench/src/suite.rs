//! Evaluation suites: chains of five feasible subtasks with instructions in
//! one form, at base or hard difficulty.
//!
//! Goal and demo media come from oracle rollouts at generation time and are
//! frozen into the suite, so evaluation never depends on the policy.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use oevla_core::archive::{read_json, write_json};
use oevla_core::{EnvId, Form, Instruction, MediaStore, VDL_FRAMES};
use oevla_forge::demos::ground_truth_boxes;
use oevla_forge::detect::{crop, CropDb, CropProvenance, CROP_PAD};
use oevla_forge::font::TextStyle;
use oevla_forge::transform::{oif_instruction, vdl_indices, vos_instruction};
use oevla_sim::policy::oracle_rollout;
use oevla_sim::render::render_with;
use oevla_sim::{derive_seed, feasible_tasks, reset, EnvProfile, TaskId, View, WorldState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::parallel::parallel_map;

pub const SUITE_FORMAT: &str = "oevla-suite/1";
pub const SUITE_FILE: &str = "suite.json";
pub const SUITE_MEDIA_DIR: &str = "media";
pub const CHAIN_LEN: usize = 5;
/// Oracle step budget when building chains and media.
pub const ORACLE_BUDGET: usize = 64;
/// Reset scenes rendered to build the in-domain crop pool.
const IN_DOMAIN_SCENES: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Base,
    Hard,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Base => "base",
            Difficulty::Hard => "hard",
        })
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "base" => Ok(Difficulty::Base),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(format!("unknown difficulty `{s}` (expected base or hard)")),
        }
    }
}

/// Which instruction forms a suite uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormChoice {
    Single(Form),
    /// Each subtask draws its form uniformly.
    Mixed,
}

impl fmt::Display for FormChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormChoice::Single(form) => write!(f, "{}", form.as_str().to_ascii_lowercase()),
            FormChoice::Mixed => f.write_str("mixed"),
        }
    }
}

impl FromStr for FormChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("mixed") {
            return Ok(FormChoice::Mixed);
        }
        Form::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .map(FormChoice::Single)
            .ok_or_else(|| format!("unknown form `{s}` (expected lang, vos, oif, vgr, vdl or mixed)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub env: EnvId,
    pub n: usize,
    pub seed: u64,
    pub form: FormChoice,
    pub difficulty: Difficulty,
    /// Render size for instruction media and observations.
    pub resolution: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub task: TaskId,
    pub instruction: Instruction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSequence {
    pub id: String,
    pub env_id: EnvId,
    pub reset_seed: u64,
    pub subtasks: Vec<Subtask>,
}

/// A task chain before instructions are attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub id: String,
    pub env_id: EnvId,
    pub reset_seed: u64,
    pub tasks: Vec<TaskId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkSuite {
    pub format: String,
    pub config: SuiteConfig,
    pub sequences: Vec<EvalSequence>,
    #[serde(skip)]
    pub media: MediaStore,
}

impl BenchmarkSuite {
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.media.write_dir(&dir.join(SUITE_MEDIA_DIR))?;
        write_json(&dir.join(SUITE_FILE), self)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut suite: BenchmarkSuite = read_json(&dir.join(SUITE_FILE))?;
        let media_dir = dir.join(SUITE_MEDIA_DIR);
        suite.media = if media_dir.is_dir() {
            MediaStore::read_dir(&media_dir)?
        } else {
            MediaStore::new()
        };
        for seq in &suite.sequences {
            for st in &seq.subtasks {
                st.instruction.validate()?;
                for id in st.instruction.image_ids() {
                    suite.media.get(id)?;
                }
            }
        }
        Ok(suite)
    }
}

/// Sampling weight of a candidate task. Each fixture's two opposite tasks
/// are never feasible together, so they get double weight; this keeps the
/// long-run frequency of all 13 tasks close to uniform.
fn task_weight(task: TaskId) -> u32 {
    match task {
        TaskId::LiftRedBlock
        | TaskId::LiftBlueBlock
        | TaskId::LiftPinkBlock
        | TaskId::PushBlockLeft
        | TaskId::PushBlockRight => 1,
        _ => 2,
    }
}

fn pick_task(state: &WorldState, prev: Option<TaskId>, rng: &mut ChaCha8Rng) -> Option<TaskId> {
    let candidates: Vec<TaskId> = feasible_tasks(state).into_iter().filter(|t| Some(*t) != prev).collect();
    let total: u32 = candidates.iter().map(|&t| task_weight(t)).sum();
    if total == 0 {
        return None;
    }
    let mut r = rng.gen_range(0..total);
    for t in candidates {
        let w = task_weight(t);
        if r < w {
            return Some(t);
        }
        r -= w;
    }
    unreachable!("weights cover the draw")
}

/// States the oracle visits for each subtask of a chain, starting from the
/// reset. `result[i][0]` is the state in which subtask `i` begins.
pub fn chain_rollouts(plan: &ChainPlan) -> Result<Vec<Vec<WorldState>>> {
    let mut state = reset(EnvProfile::get(plan.env_id), plan.reset_seed);
    let mut out = Vec::with_capacity(plan.tasks.len());
    for &task in &plan.tasks {
        let states = oracle_rollout(&state, task, ORACLE_BUDGET)?.ok_or_else(|| BenchError::OracleStalled {
            task,
            sequence: plan.id.clone(),
        })?;
        state = states.last().expect("rollout includes the start").clone();
        out.push(states);
    }
    Ok(out)
}

pub fn sequence_id(index: usize) -> String {
    format!("seq{index:05}")
}

fn gen_one(env: EnvId, seed: u64, index: usize) -> Result<ChainPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "chain", index as u64));
    let reset_seed: u64 = rng.gen();
    let mut state = reset(EnvProfile::get(env), reset_seed);
    let mut tasks = Vec::with_capacity(CHAIN_LEN);
    for _ in 0..CHAIN_LEN {
        let task = pick_task(&state, tasks.last().copied(), &mut rng)
            .expect("the task registry always leaves a feasible task");
        let states = oracle_rollout(&state, task, ORACLE_BUDGET)?.ok_or_else(|| BenchError::OracleStalled {
            task,
            sequence: sequence_id(index),
        })?;
        state = states.last().expect("non-empty").clone();
        tasks.push(task);
    }
    Ok(ChainPlan {
        id: sequence_id(index),
        env_id: env,
        reset_seed,
        tasks,
    })
}

/// `n` task chains, each stepwise feasible under the oracle. Depends only on
/// `(env, n, seed)`.
pub fn gen_sequences(env: EnvId, n: usize, seed: u64, workers: usize) -> Result<Vec<ChainPlan>> {
    if n == 0 {
        return Err(BenchError::Config("at least one sequence is required".into()));
    }
    parallel_map(n, workers, |i| gen_one(env, seed, i))
        .into_iter()
        .collect()
}

/// Crops of every object from reset scenes of `env`, the base-mode pool.
pub fn in_domain_crops(env: EnvId, seed: u64, res: u32) -> Result<CropDb> {
    let profile = EnvProfile::get(env);
    let mut db = CropDb::new();
    for j in 0..IN_DOMAIN_SCENES {
        let state = reset(profile, derive_seed(seed, "in-domain-crops", j));
        let img = render_with(&state, profile, View::Static, res)?;
        for det in ground_truth_boxes(&state, res, 0) {
            db.add(
                &det.object,
                crop(&img, det.bbox, CROP_PAD),
                CropProvenance::InDomain,
                format!("{env}/scene{j}"),
            )?;
        }
    }
    Ok(db)
}

/// Pools available when attaching instructions.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    /// External crop pool, required for hard VOS.
    pub external: Option<CropDb>,
}

/// Frames of a subtask demo, padded by repeating the final state so a
/// four-frame sample always exists.
fn demo_states(states: &[WorldState]) -> Vec<WorldState> {
    let mut v = states.to_vec();
    while v.len() < VDL_FRAMES {
        v.push(v.last().expect("non-empty").clone());
    }
    v
}

struct Attacher<'a> {
    cfg: &'a SuiteConfig,
    in_domain: Option<CropDb>,
    external: Option<&'a CropDb>,
}

impl Attacher<'_> {
    fn media_profile(&self, rng: &mut ChaCha8Rng) -> EnvProfile {
        match self.cfg.difficulty {
            Difficulty::Base => EnvProfile::get(self.cfg.env).clone(),
            Difficulty::Hard => {
                let others: Vec<EnvId> = EnvId::ALL.into_iter().filter(|e| *e != self.cfg.env).collect();
                let other = others[rng.gen_range(0..others.len())];
                EnvProfile::get(other).with_camera(EnvProfile::alternate_camera())
            }
        }
    }

    fn instruction(
        &self,
        form: Form,
        task: TaskId,
        states: &[WorldState],
        rng: &mut ChaCha8Rng,
        media: &mut MediaStore,
    ) -> Result<Instruction> {
        let start = &states[0];
        let ann = task.annotation(start)?;
        let res = self.cfg.resolution;
        Ok(match form {
            Form::Lang => Instruction::lang(ann.text),
            Form::Vos => {
                let db = match self.cfg.difficulty {
                    Difficulty::Base => self.in_domain.as_ref().expect("built for VOS suites"),
                    Difficulty::Hard => self
                        .external
                        .ok_or_else(|| BenchError::MissingResource("hard VOS needs an external crop pool".into()))?,
                };
                vos_instruction(&ann, db, rng, media)?
            }
            Form::Oif => {
                let style = match self.cfg.difficulty {
                    Difficulty::Base => TextStyle::plain(),
                    Difficulty::Hard => TextStyle::sample_hard(rng),
                };
                let seed = rng.gen();
                oif_instruction(&ann.text, &style, seed, media)?
            }
            Form::Vgr => {
                let profile = self.media_profile(rng);
                let goal = render_with(states.last().expect("non-empty"), &profile, View::Static, res)?;
                Instruction::vgr(media.insert(goal))
            }
            Form::Vdl => {
                let profile = self.media_profile(rng);
                let clip = demo_states(states);
                let idx = vdl_indices(clip.len()).expect("padded to four frames");
                let mut frames = Vec::with_capacity(VDL_FRAMES);
                for i in idx {
                    frames.push(media.insert(render_with(&clip[i], &profile, View::Static, res)?));
                }
                Instruction::vdl(frames.try_into().expect("four frames"))
            }
        })
    }
}

/// Attaches instructions of the configured form and difficulty to `plans`.
pub fn attach_instructions(
    plans: &[ChainPlan],
    cfg: &SuiteConfig,
    resources: &Resources,
    workers: usize,
) -> Result<BenchmarkSuite> {
    let needs = |f: Form| cfg.form == FormChoice::Single(f) || cfg.form == FormChoice::Mixed;
    if needs(Form::Vos) && cfg.difficulty == Difficulty::Hard && resources.external.is_none() {
        return Err(BenchError::MissingResource(
            "hard VOS needs an external crop pool".into(),
        ));
    }
    let attacher = Attacher {
        cfg,
        in_domain: if needs(Form::Vos) && cfg.difficulty == Difficulty::Base {
            Some(in_domain_crops(cfg.env, cfg.seed, cfg.resolution)?)
        } else {
            None
        },
        external: resources.external.as_ref(),
    };
    let built = parallel_map(plans.len(), workers, |i| -> Result<(EvalSequence, MediaStore)> {
        let plan = &plans[i];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "attach", i as u64));
        let mut media = MediaStore::new();
        let rollouts = chain_rollouts(plan)?;
        let mut subtasks = Vec::with_capacity(plan.tasks.len());
        for (&task, states) in plan.tasks.iter().zip(&rollouts) {
            let form = match cfg.form {
                FormChoice::Single(f) => f,
                FormChoice::Mixed => Form::ALL[rng.gen_range(0..Form::ALL.len())],
            };
            let instruction = attacher.instruction(form, task, states, &mut rng, &mut media)?;
            instruction.validate()?;
            subtasks.push(Subtask { task, instruction });
        }
        Ok((
            EvalSequence {
                id: plan.id.clone(),
                env_id: plan.env_id,
                reset_seed: plan.reset_seed,
                subtasks,
            },
            media,
        ))
    });
    let mut sequences = Vec::with_capacity(plans.len());
    let mut media = MediaStore::new();
    for r in built {
        let (seq, m) = r?;
        media.extend_from(&m);
        sequences.push(seq);
    }
    Ok(BenchmarkSuite {
        format: SUITE_FORMAT.into(),
        config: cfg.clone(),
        sequences,
        media,
    })
}

/// Chains plus instructions in one call.
pub fn generate_suite(cfg: &SuiteConfig, resources: &Resources, workers: usize) -> Result<BenchmarkSuite> {
    let plans = gen_sequences(cfg.env, cfg.n, cfg.seed, workers)?;
    attach_instructions(&plans, cfg, resources, workers)
}
