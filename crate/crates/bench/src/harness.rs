//! Rollouts, replay checks, parallel suite runs and reports.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use oevla_core::archive::write_atomic;
use oevla_core::{Action, ActionChunk, ActionCodec, CodecConfig, MediaStore};
use oevla_sim::render::{render_observation, DEFAULT_RESOLUTION};
use oevla_sim::{
    reset, step, success, EnvProfile, Policy, PolicyError, PolicyFactory, PolicyResponse, StepObservation,
    SubtaskContext, TaskId, WorldState,
};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::metrics::{metrics_from_depths, MetricsReport};
use crate::parallel::parallel_map;
use crate::suite::{BenchmarkSuite, Difficulty, EvalSequence, FormChoice};

pub const DEFAULT_BUDGET: usize = 64;
pub const BUDGET_EXHAUSTED: &str = "budget_exhausted";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replan {
    /// Execute every action of a chunk before asking again.
    EveryChunk,
    /// Execute only the first action of each chunk.
    EveryStep,
}

impl FromStr for Replan {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "every_chunk" | "every-chunk" => Ok(Replan::EveryChunk),
            "every_step" | "every-step" => Ok(Replan::EveryStep),
            _ => Err(format!(
                "unknown replan mode `{s}` (expected every_chunk or every_step)"
            )),
        }
    }
}

impl fmt::Display for Replan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Replan::EveryChunk => "every_chunk",
            Replan::EveryStep => "every_step",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    /// Env steps per subtask.
    pub budget: usize,
    pub replan: Replan,
    pub resolution: u32,
    pub codec: CodecConfig,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            budget: DEFAULT_BUDGET,
            replan: Replan::EveryChunk,
            resolution: DEFAULT_RESOLUTION,
            codec: CodecConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskLog {
    pub task: TaskId,
    pub steps: usize,
    pub success: bool,
    /// Error code when the subtask failed, `budget_exhausted` if it simply
    /// ran out of steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Every action executed, in order.
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutLog {
    pub sequence_id: String,
    pub env_id: oevla_core::EnvId,
    pub reset_seed: u64,
    /// Attempted subtasks; only the last may have failed.
    pub subtasks: Vec<SubtaskLog>,
    pub depth: usize,
}

fn instruction_media(seq: &EvalSequence, index: usize, media: &MediaStore) -> Result<MediaStore> {
    let mut out = MediaStore::new();
    for id in seq.subtasks[index].instruction.image_ids() {
        out.insert_arc(media.get(id)?.clone());
    }
    Ok(out)
}

enum Outcome {
    Continue,
    Done,
    Failed(String, String),
}

/// Rolls one session through `seq`. Policy and codec errors fail the
/// current subtask with a reason; only missing media is a hard error.
pub fn rollout_sequence(
    seq: &EvalSequence,
    media: &MediaStore,
    policy: &mut dyn Policy,
    privileged: bool,
    cfg: &RolloutConfig,
) -> Result<RolloutLog> {
    let codec = ActionCodec::new(cfg.codec)?;
    let mut state = reset(EnvProfile::get(seq.env_id), seq.reset_seed);
    let mut subtasks = Vec::with_capacity(seq.subtasks.len());
    for (index, st) in seq.subtasks.iter().enumerate() {
        let ctx = SubtaskContext {
            sequence_id: seq.id.clone(),
            subtask_index: index,
            instruction: st.instruction.clone(),
            media: instruction_media(seq, index, media)?,
            privileged_task: privileged.then_some(st.task),
        };
        let initial = state.clone();
        let mut log = SubtaskLog {
            task: st.task,
            steps: 0,
            success: false,
            failure: None,
            message: None,
            actions: Vec::new(),
        };
        let mut outcome = match policy.start_subtask(&ctx) {
            Ok(()) => Outcome::Continue,
            Err(e) => Outcome::Failed(e.code().to_string(), e.to_string()),
        };
        let mut decision = 0;
        while matches!(outcome, Outcome::Continue) && log.steps < cfg.budget {
            let obs = StepObservation {
                step_index: decision,
                obs: Arc::new(render_observation(&state, cfg.resolution)?),
                proprio: state.proprio(),
                privileged_state: privileged.then(|| state.clone()),
            };
            decision += 1;
            let chunk = match policy.act(&obs) {
                Ok(resp) => to_chunk(resp, &codec, &cfg.codec),
                Err(e) => Err((e.code().to_string(), e.to_string())),
            };
            let chunk = match chunk {
                Ok(c) => c,
                Err((code, message)) => {
                    policy.report_error(&code, &message);
                    outcome = Outcome::Failed(code, message);
                    break;
                }
            };
            let take = match cfg.replan {
                Replan::EveryChunk => chunk.len(),
                Replan::EveryStep => 1,
            };
            for a in chunk.actions().iter().take(take) {
                if log.steps >= cfg.budget {
                    break;
                }
                state = step(&state, a);
                log.steps += 1;
                log.actions.push(*a);
                if success(st.task, &initial, &state) {
                    outcome = Outcome::Done;
                    break;
                }
            }
        }
        match outcome {
            Outcome::Done => log.success = true,
            Outcome::Failed(code, message) => {
                log.failure = Some(code);
                log.message = Some(message);
            }
            Outcome::Continue => log.failure = Some(BUDGET_EXHAUSTED.into()),
        }
        let ok = log.success;
        subtasks.push(log);
        if !ok {
            break;
        }
    }
    policy.finish();
    let depth = subtasks.iter().take_while(|s| s.success).count();
    Ok(RolloutLog {
        sequence_id: seq.id.clone(),
        env_id: seq.env_id,
        reset_seed: seq.reset_seed,
        subtasks,
        depth,
    })
}

fn to_chunk(resp: PolicyResponse, codec: &ActionCodec, cfg: &CodecConfig) -> Result<ActionChunk, (String, String)> {
    let r = match resp {
        PolicyResponse::Chunk(c) => ActionChunk::from_flat(&c.flatten(), cfg),
        PolicyResponse::Tokens(t) => codec.decode_chunk(&t),
    };
    r.map_err(|e| (e.code().to_string(), e.to_string()))
}

/// Replays a log's action trace from the reset and checks every recorded
/// success flag and step count.
pub fn verify_log(log: &RolloutLog) -> bool {
    let mut state: WorldState = reset(EnvProfile::get(log.env_id), log.reset_seed);
    for st in &log.subtasks {
        let initial = state.clone();
        let mut reached = None;
        for (i, a) in st.actions.iter().enumerate() {
            state = step(&state, a);
            if reached.is_none() && success(st.task, &initial, &state) {
                reached = Some(i + 1);
            }
        }
        let ok = match reached {
            Some(n) => st.success && n == st.actions.len(),
            None => !st.success,
        };
        if !ok || st.steps != st.actions.len() {
            return false;
        }
    }
    log.depth == log.subtasks.iter().take_while(|s| s.success).count()
}

/// Runs every sequence of `suite` with `workers` parallel sessions. Logs
/// come back in suite order whatever the worker count.
pub fn run_suite(
    suite: &BenchmarkSuite,
    factory: &dyn PolicyFactory,
    cfg: &RolloutConfig,
    workers: usize,
) -> Result<Vec<RolloutLog>> {
    let privileged = factory.privileged();
    let logs = parallel_map(suite.sequences.len(), workers, |i| -> Result<RolloutLog> {
        let seq = &suite.sequences[i];
        let mut session = factory.session(&seq.id)?;
        rollout_sequence(seq, &suite.media, session.as_mut(), privileged, cfg)
    });
    let mut logs: Vec<RolloutLog> = logs.into_iter().collect::<Result<_>>()?;
    logs.sort_by(|a, b| a.sequence_id.cmp(&b.sequence_id));
    Ok(logs)
}

pub fn compute_metrics(logs: &[RolloutLog]) -> Result<MetricsReport> {
    let depths: Vec<usize> = logs.iter().map(|l| l.depth).collect();
    metrics_from_depths(&depths)
}

/// Routes a chunk-emitting policy through the token codec, so the harness
/// sees exactly what a token-emitting model would send.
pub struct CodecLoopFactory<F> {
    pub inner: F,
    pub codec: ActionCodec,
}

struct CodecLoopSession {
    inner: Box<dyn Policy>,
    codec: ActionCodec,
}

impl Policy for CodecLoopSession {
    fn start_subtask(&mut self, ctx: &SubtaskContext) -> Result<(), PolicyError> {
        self.inner.start_subtask(ctx)
    }

    fn act(&mut self, obs: &StepObservation) -> Result<PolicyResponse, PolicyError> {
        match self.inner.act(obs)? {
            PolicyResponse::Chunk(c) => {
                let tokens = self.codec.encode_chunk(&c).map_err(|e| PolicyError::Protocol {
                    code: e.code().into(),
                    message: e.to_string(),
                })?;
                Ok(PolicyResponse::Tokens(tokens.into_iter().map(i64::from).collect()))
            }
            tokens => Ok(tokens),
        }
    }

    fn report_error(&mut self, code: &str, message: &str) {
        self.inner.report_error(code, message);
    }

    fn finish(&mut self) {
        self.inner.finish();
    }
}

impl<F: PolicyFactory> PolicyFactory for CodecLoopFactory<F> {
    fn session(&self, sequence_id: &str) -> Result<Box<dyn Policy>, PolicyError> {
        Ok(Box::new(CodecLoopSession {
            inner: self.inner.session(sequence_id)?,
            codec: self.codec,
        }))
    }

    fn privileged(&self) -> bool {
        self.inner.privileged()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStats {
    pub attempts: usize,
    pub successes: usize,
}

/// `eval run` output: one table row plus breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub env: oevla_core::EnvId,
    pub form: FormChoice,
    pub difficulty: Difficulty,
    pub suite_seed: u64,
    pub rollout: RolloutConfig,
    pub metrics: MetricsReport,
    pub per_task: BTreeMap<String, TaskStats>,
    /// Failure reason → count.
    pub failures: BTreeMap<String, usize>,
}

impl EvalReport {
    pub fn new(policy: &str, suite: &BenchmarkSuite, rollout: &RolloutConfig, logs: &[RolloutLog]) -> Result<Self> {
        let mut per_task: BTreeMap<String, TaskStats> = BTreeMap::new();
        let mut failures: BTreeMap<String, usize> = BTreeMap::new();
        for log in logs {
            for st in &log.subtasks {
                let e = per_task.entry(st.task.name().to_string()).or_insert(TaskStats {
                    attempts: 0,
                    successes: 0,
                });
                e.attempts += 1;
                e.successes += usize::from(st.success);
                if let Some(f) = &st.failure {
                    *failures.entry(f.clone()).or_default() += 1;
                }
            }
        }
        Ok(EvalReport {
            policy: policy.to_string(),
            env: suite.config.env,
            form: suite.config.form,
            difficulty: suite.config.difficulty,
            suite_seed: suite.config.seed,
            rollout: rollout.clone(),
            metrics: compute_metrics(logs)?,
            per_task,
            failures,
        })
    }
}

pub fn write_logs(path: &Path, logs: &[RolloutLog]) -> Result<()> {
    let mut buf = Vec::new();
    for log in logs {
        serde_json::to_writer(&mut buf, log).map_err(|e| BenchError::Config(e.to_string()))?;
        buf.write_all(b"\n").expect("in-memory write");
    }
    write_atomic(path, &buf)?;
    Ok(())
}

pub fn read_logs(path: &Path) -> Result<Vec<RolloutLog>> {
    Ok(oevla_core::sample::read_jsonl(path)?)
}
