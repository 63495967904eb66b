//! Policy interface and the built-in scripted policies.
//!
//! A [`PolicyFactory`] hands out one [`Policy`] session per evaluation
//! sequence. Sessions see each subtask's instruction once, then one
//! observation per decision step, and answer with either a float chunk or
//! 35 action tokens.

use std::sync::Arc;

use image::RgbImage;
use oevla_core::{Action, ActionChunk, Form, Instruction, MediaStore, Proprio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{feasible, push_target, TaskId};
use crate::world::{step, BlockColor, WorldState, DELTA, HANDLE_HEIGHT, PRESS_HEIGHT, PUSH_HEIGHT};

pub const CHUNK_LEN: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("task {0} is infeasible from the current state")]
    Infeasible(TaskId),
    #[error("policy needs privileged state that the harness did not provide")]
    MissingPrivileged,
    #[error("cannot interpret instruction: {0}")]
    Unparseable(String),
    #[error("{message}")]
    Protocol { code: String, message: String },
    #[error("timed out waiting for the policy")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
}

impl PolicyError {
    pub fn code(&self) -> &str {
        match self {
            PolicyError::Infeasible(_) => "infeasible",
            PolicyError::MissingPrivileged => "missing_privileged",
            PolicyError::Unparseable(_) => "unparseable_instruction",
            PolicyError::Protocol { code, .. } => code,
            PolicyError::Timeout => "timeout",
            PolicyError::Transport(_) => "transport",
        }
    }
}

/// What a policy learns at the start of a subtask.
#[derive(Debug, Clone)]
pub struct SubtaskContext {
    pub sequence_id: String,
    pub subtask_index: usize,
    pub instruction: Instruction,
    /// Pixels for every image the instruction references.
    pub media: MediaStore,
    /// Ground-truth task, only given to privileged policies.
    pub privileged_task: Option<TaskId>,
}

/// One decision step.
#[derive(Debug, Clone)]
pub struct StepObservation {
    pub step_index: usize,
    /// Static and wrist views side by side.
    pub obs: Arc<RgbImage>,
    pub proprio: Proprio,
    pub privileged_state: Option<WorldState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyResponse {
    Chunk(ActionChunk),
    Tokens(Vec<i64>),
}

pub trait Policy: Send {
    fn start_subtask(&mut self, ctx: &SubtaskContext) -> Result<(), PolicyError>;
    fn act(&mut self, obs: &StepObservation) -> Result<PolicyResponse, PolicyError>;
    /// The harness rejected the last response. Remote sessions forward this
    /// to the far side; the subtask is already counted as failed.
    fn report_error(&mut self, _code: &str, _message: &str) {}
    /// Called once after the last subtask of a sequence.
    fn finish(&mut self) {}
}

pub trait PolicyFactory: Send + Sync {
    fn session(&self, sequence_id: &str) -> Result<Box<dyn Policy>, PolicyError>;
    /// Whether sessions need `privileged_task` / `privileged_state`.
    fn privileged(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// scripted oracle

/// Cruise height for moves between targets.
const SAFE_Z: f64 = 0.15;
const LIFT_Z: f64 = 0.25;
const WORK_Z: f64 = 0.05;
const PUSH_Z: f64 = 0.02;
const ALIGN_TOL: f64 = 0.005;
/// Push approach offset from the block centre, outside the contact radius.
const PUSH_STANDOFF: f64 = 0.07;

fn open_gripper() -> Action {
    Action::ZERO_OPEN
}

fn move_toward(state: &WorldState, target: [f64; 3], grip: f64) -> Action {
    let p = state.gripper.position;
    let mut a = [0.0; 7];
    for i in 0..3 {
        a[i] = ((target[i] - p[i]) / DELTA).clamp(-1.0, 1.0);
    }
    a[6] = grip;
    Action(a)
}

fn aligned(state: &WorldState, xy: [f64; 2]) -> bool {
    let p = state.gripper.position;
    (p[0] - xy[0]).abs() <= ALIGN_TOL && (p[1] - xy[1]).abs() <= ALIGN_TOL
}

/// Rise to cruise height, travel over `xy`, then descend to `z`; open gripper.
fn approach(state: &WorldState, xy: [f64; 2], z: f64) -> Action {
    let p = state.gripper.position;
    if aligned(state, xy) {
        move_toward(state, [xy[0], xy[1], z], 1.0)
    } else if p[2] < SAFE_Z - ALIGN_TOL {
        move_toward(state, [p[0], p[1], SAFE_Z], 1.0)
    } else {
        move_toward(state, [xy[0], xy[1], SAFE_Z], 1.0)
    }
}

fn goal_reached(task: TaskId, state: &WorldState) -> bool {
    match task {
        TaskId::LiftRedBlock | TaskId::LiftBlueBlock | TaskId::LiftPinkBlock => {
            let c = task.lift_color().expect("lift task");
            state.is_held(c) && state.block(c).position[2] >= LIFT_Z - ALIGN_TOL
        }
        TaskId::PushBlockLeft | TaskId::PushBlockRight => false,
        TaskId::OpenDrawer => state.drawer_open >= 0.8,
        TaskId::CloseDrawer => state.drawer_open <= 0.2,
        TaskId::MoveSliderLeft => state.slider_pos <= 0.2,
        TaskId::MoveSliderRight => state.slider_pos >= 0.8,
        TaskId::TurnOnLightbulb => state.switch_on,
        TaskId::TurnOffLightbulb => !state.switch_on,
        TaskId::TurnOnLed => state.led_on,
        TaskId::TurnOffLed => !state.led_on,
    }
}

fn hold_still(state: &WorldState) -> Action {
    let mut a = Action::ZERO_OPEN;
    a.0[6] = if state.gripper.closed { -1.0 } else { 1.0 };
    a
}

fn lift_step(state: &WorldState, color: BlockColor) -> Action {
    let g = &state.gripper;
    if state.is_held(color) {
        let p = g.position;
        return move_toward(state, [p[0], p[1], LIFT_Z], -1.0);
    }
    if g.closed {
        return open_gripper();
    }
    let b = state.block(color).position;
    if aligned(state, [b[0], b[1]]) && g.position[2] <= ALIGN_TOL * 2.0 {
        let mut a = Action::ZERO_OPEN;
        a.0[6] = -1.0;
        return a;
    }
    approach(state, [b[0], b[1]], 0.0)
}

/// Block in contact on the pushing side of a low, open gripper.
fn push_contact(state: &WorldState, sign: f64) -> Option<BlockColor> {
    let g = state.gripper.position;
    if g[2] >= PUSH_HEIGHT || state.gripper.closed {
        return None;
    }
    BlockColor::ALL.into_iter().find(|&c| {
        let b = state.block(c).position;
        let ahead = sign * (b[0] - g[0]);
        !state.is_held(c) && ahead > 0.0 && ahead <= PUSH_STANDOFF + 0.02 && (b[1] - g[1]).abs() < 0.02
    })
}

fn push_step(state: &WorldState, task: TaskId) -> Result<Action, PolicyError> {
    let sign = if task == TaskId::PushBlockLeft { -1.0 } else { 1.0 };
    if state.gripper.closed {
        return Ok(open_gripper());
    }
    if let Some(c) = push_contact(state, sign) {
        let b = state.block(c).position;
        let g = state.gripper.position;
        let mut a = move_toward(state, [g[0], b[1], PUSH_Z], 1.0);
        a.0[0] = sign;
        return Ok(a);
    }
    let c = push_target(task, state).ok_or(PolicyError::Infeasible(task))?;
    let b = state.block(c).position;
    Ok(approach(state, [b[0] - sign * PUSH_STANDOFF, b[1]], PUSH_Z))
}

/// Grab a handle, then drag it along one axis until the handle reaches `goal`.
fn drag_step(state: &WorldState, handle: [f64; 2], goal: [f64; 2]) -> Action {
    let g = &state.gripper;
    if state.engaged_with(handle) {
        let p = g.position;
        let target = [p[0] + goal[0] - handle[0], p[1] + goal[1] - handle[1], p[2]];
        return move_toward(state, target, -1.0);
    }
    if g.closed {
        return open_gripper();
    }
    if aligned(state, handle) && g.position[2] <= WORK_Z + ALIGN_TOL && g.position[2] < HANDLE_HEIGHT {
        let mut a = Action::ZERO_OPEN;
        a.0[6] = -1.0;
        return a;
    }
    approach(state, handle, WORK_Z)
}

fn press_step(state: &WorldState, at: [f64; 2]) -> Action {
    let g = &state.gripper;
    if g.closed {
        return open_gripper();
    }
    if aligned(state, at) {
        if g.position[2] < PRESS_HEIGHT {
            return move_toward(state, [at[0], at[1], SAFE_Z], 1.0);
        }
        return move_toward(state, [at[0], at[1], WORK_Z], 1.0);
    }
    approach(state, at, SAFE_Z)
}

/// Next single action of the waypoint controller.
pub fn oracle_step(state: &WorldState, task: TaskId) -> Result<Action, PolicyError> {
    if goal_reached(task, state) {
        return Ok(hold_still(state));
    }
    let profile = state.profile();
    let action = match task {
        TaskId::LiftRedBlock | TaskId::LiftBlueBlock | TaskId::LiftPinkBlock => {
            lift_step(state, task.lift_color().expect("lift task"))
        }
        TaskId::PushBlockLeft | TaskId::PushBlockRight => push_step(state, task)?,
        TaskId::OpenDrawer | TaskId::CloseDrawer => {
            let goal = if task == TaskId::OpenDrawer { 0.9 } else { 0.0 };
            drag_step(state, state.drawer_handle(), profile.drawer_handle_at(goal))
        }
        TaskId::MoveSliderLeft | TaskId::MoveSliderRight => {
            let goal = if task == TaskId::MoveSliderRight { 1.0 } else { 0.0 };
            drag_step(state, state.slider_handle(), profile.slider_handle(goal))
        }
        TaskId::TurnOnLightbulb | TaskId::TurnOffLightbulb => press_step(state, profile.switch),
        TaskId::TurnOnLed | TaskId::TurnOffLed => press_step(state, profile.button),
    };
    Ok(action)
}

/// The next five oracle actions, planned by simulating forward.
pub fn oracle_act(state: &WorldState, task: TaskId) -> Result<ActionChunk, PolicyError> {
    if !goal_reached(task, state) && !feasible(task, state) && !in_progress(task, state) {
        return Err(PolicyError::Infeasible(task));
    }
    let mut s = state.clone();
    let mut actions = Vec::with_capacity(CHUNK_LEN);
    for _ in 0..CHUNK_LEN {
        let a = oracle_step(&s, task)?;
        s = step(&s, &a);
        actions.push(a);
    }
    Ok(ActionChunk::new(actions))
}

fn in_progress(task: TaskId, state: &WorldState) -> bool {
    match task {
        TaskId::PushBlockLeft => push_contact(state, -1.0).is_some(),
        TaskId::PushBlockRight => push_contact(state, 1.0).is_some(),
        TaskId::OpenDrawer | TaskId::CloseDrawer => state.engaged_with(state.drawer_handle()),
        TaskId::MoveSliderLeft | TaskId::MoveSliderRight => state.engaged_with(state.slider_handle()),
        TaskId::LiftRedBlock | TaskId::LiftBlueBlock | TaskId::LiftPinkBlock => true,
        _ => false,
    }
}

/// Drives `task` to success one step at a time; returns every visited state,
/// starting with `state`. `None` if the budget runs out first.
pub fn oracle_rollout(state: &WorldState, task: TaskId, budget: usize) -> Result<Option<Vec<WorldState>>, PolicyError> {
    let mut states = vec![state.clone()];
    let mut s = state.clone();
    while !crate::task::success(task, state, &s) {
        if states.len() > budget {
            return Ok(None);
        }
        let a = oracle_step(&s, task)?;
        s = step(&s, &a);
        states.push(s.clone());
    }
    Ok(Some(states))
}

/// Privileged oracle: told the task, reads the world state.
#[derive(Debug, Default)]
pub struct OracleSession {
    task: Option<TaskId>,
}

impl Policy for OracleSession {
    fn start_subtask(&mut self, ctx: &SubtaskContext) -> Result<(), PolicyError> {
        self.task = Some(ctx.privileged_task.ok_or(PolicyError::MissingPrivileged)?);
        Ok(())
    }

    fn act(&mut self, obs: &StepObservation) -> Result<PolicyResponse, PolicyError> {
        let task = self.task.ok_or(PolicyError::MissingPrivileged)?;
        let state = obs.privileged_state.as_ref().ok_or(PolicyError::MissingPrivileged)?;
        oracle_act(state, task).map(PolicyResponse::Chunk)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleFactory;

impl PolicyFactory for OracleFactory {
    fn session(&self, _sequence_id: &str) -> Result<Box<dyn Policy>, PolicyError> {
        Ok(Box::new(OracleSession::default()))
    }

    fn privileged(&self) -> bool {
        true
    }
}

/// Recovers the task from a language instruction, then drives the oracle
/// controller. It never looks at `privileged_task`.
#[derive(Debug, Default)]
pub struct InstructionOracleSession {
    task: Option<TaskId>,
}

impl Policy for InstructionOracleSession {
    fn start_subtask(&mut self, ctx: &SubtaskContext) -> Result<(), PolicyError> {
        if ctx.instruction.form != Form::Lang {
            return Err(PolicyError::Unparseable(format!(
                "{} instructions carry no parseable text",
                ctx.instruction.form
            )));
        }
        let text = ctx.instruction.text();
        self.task = Some(TaskId::parse_instruction(&text).ok_or(PolicyError::Unparseable(text))?);
        Ok(())
    }

    fn act(&mut self, obs: &StepObservation) -> Result<PolicyResponse, PolicyError> {
        let task = self
            .task
            .ok_or_else(|| PolicyError::Unparseable("no instruction".into()))?;
        let state = obs.privileged_state.as_ref().ok_or(PolicyError::MissingPrivileged)?;
        oracle_act(state, task).map(PolicyResponse::Chunk)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct InstructionOracleFactory;

impl PolicyFactory for InstructionOracleFactory {
    fn session(&self, _sequence_id: &str) -> Result<Box<dyn Policy>, PolicyError> {
        Ok(Box::new(InstructionOracleSession::default()))
    }

    fn privileged(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// random baseline

/// Translation and rotation uniform on `[-1, 1]`, gripper `±1` with p = 0.5.
pub fn random_act(rng: &mut impl Rng) -> ActionChunk {
    let actions = (0..CHUNK_LEN)
        .map(|_| {
            let mut d = [0.0; 7];
            for v in d.iter_mut().take(6) {
                *v = rng.gen_range(-1.0..=1.0);
            }
            d[6] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Action(d)
        })
        .collect();
    ActionChunk::new(actions)
}

pub struct RandomSession {
    rng: ChaCha8Rng,
}

impl RandomSession {
    pub fn new(seed: u64) -> Self {
        RandomSession {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomSession {
    fn start_subtask(&mut self, _ctx: &SubtaskContext) -> Result<(), PolicyError> {
        Ok(())
    }

    fn act(&mut self, _obs: &StepObservation) -> Result<PolicyResponse, PolicyError> {
        Ok(PolicyResponse::Chunk(random_act(&mut self.rng)))
    }
}

/// Seeds each session from `(seed, sequence id)` so results do not depend on
/// which worker runs which sequence.
#[derive(Debug, Clone, Copy)]
pub struct RandomFactory {
    pub seed: u64,
}

pub fn session_seed(seed: u64, sequence_id: &str) -> u64 {
    crate::seed::derive_seed(seed, sequence_id, 0)
}

impl PolicyFactory for RandomFactory {
    fn session(&self, sequence_id: &str) -> Result<Box<dyn Policy>, PolicyError> {
        Ok(Box::new(RandomSession::new(session_seed(self.seed, sequence_id))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::EnvProfile;
    use crate::task::{feasible_tasks, success};
    use crate::world::reset;
    use oevla_core::{ActionCodec, EnvId};

    /// Runs the oracle one step at a time until success; returns steps used.
    fn rollout(initial: &WorldState, task: TaskId, quantize: bool, limit: usize) -> Option<(usize, WorldState)> {
        let codec = ActionCodec::default();
        let mut s = initial.clone();
        let mut used = 0;
        while used < limit {
            let mut chunk = oracle_act(&s, task).unwrap();
            if quantize {
                chunk = codec.quantize(&chunk).unwrap();
            }
            for a in chunk.actions() {
                assert!(a.is_normalized());
                s = step(&s, a);
                used += 1;
                if success(task, initial, &s) {
                    return Some((used, s));
                }
                if used == limit {
                    break;
                }
            }
        }
        None
    }

    #[test]
    fn oracle_solves_every_task_from_every_feasible_reset() {
        for env in EnvId::ALL {
            for seed in 0..200 {
                let s = reset(EnvProfile::get(env), seed);
                for task in feasible_tasks(&s) {
                    for quantize in [false, true] {
                        let r = rollout(&s, task, quantize, 64);
                        assert!(r.is_some(), "{task} env {env} seed {seed} quantize {quantize}");
                    }
                }
            }
        }
    }

    #[test]
    fn lift_red_from_every_seed() {
        for seed in 0..200 {
            let s = reset(EnvProfile::get(EnvId::D), seed);
            let (steps, _) = rollout(&s, TaskId::LiftRedBlock, false, 64).expect("lift succeeds");
            assert!(steps <= 64);
        }
    }

    #[test]
    fn satisfied_task_gives_zero_motion() {
        let mut s = reset(EnvProfile::get(EnvId::A), 0);
        s.led_on = true;
        let chunk = oracle_act(&s, TaskId::TurnOnLed).unwrap();
        for a in chunk.actions() {
            assert_eq!(&a.0[..6], &[0.0; 6]);
        }
    }

    #[test]
    fn infeasible_push_errors() {
        let mut s = reset(EnvProfile::get(EnvId::A), 0);
        for b in s.blocks.iter_mut() {
            b.position[0] = 0.15;
        }
        assert_eq!(
            oracle_act(&s, TaskId::PushBlockLeft),
            Err(PolicyError::Infeasible(TaskId::PushBlockLeft))
        );
    }

    #[test]
    fn oracle_is_deterministic() {
        let s = reset(EnvProfile::get(EnvId::B), 17);
        for t in feasible_tasks(&s) {
            assert_eq!(oracle_act(&s, t), oracle_act(&s, t));
        }
    }

    #[test]
    fn random_policy_statistics() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_act(&mut a), random_act(&mut b));

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut sums = [0.0; 7];
        let draws = 100_000 / CHUNK_LEN;
        for _ in 0..draws {
            for act in random_act(&mut rng).actions() {
                assert!(act.is_normalized());
                for (sum, v) in sums.iter_mut().zip(act.0) {
                    *sum += v;
                }
            }
        }
        for s in sums {
            assert!((s / 100_000.0).abs() < 0.02);
        }
    }

    #[test]
    fn session_seeds_differ_by_sequence() {
        assert_ne!(session_seed(1, "seq-0001"), session_seed(1, "seq-0002"));
        assert_eq!(session_seed(1, "seq-0001"), session_seed(1, "seq-0001"));
    }
}
