//! World state and dynamics.
//!
//! The scene is the unit cube seen from above: three blocks on the table
//! (z = 0), a drawer and a slider with draggable handles, a switch that
//! toggles a lightbulb and a button that toggles an LED. The rotation part of
//! an action is integrated into the gripper pose but has no effect on anything
//! else.

use std::fmt;
use std::str::FromStr;

use oevla_core::{Action, EnvId, Proprio};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::profile::EnvProfile;

/// Translation per unit action per step.
pub const DELTA: f64 = 0.05;
pub const GRASP_RADIUS: f64 = 0.04;
/// Gripper height below which a downward move presses a switch or button.
pub const PRESS_HEIGHT: f64 = 0.1;
/// An open gripper below this height pushes blocks it runs into.
pub const PUSH_HEIGHT: f64 = 0.05;
/// A closed gripper below this height drags a handle it sits on.
pub const HANDLE_HEIGHT: f64 = 0.1;
pub const DRAWER_TRAVEL: f64 = 0.2;
pub const SLIDER_TRAVEL: f64 = 0.3;
pub const MIN_BLOCK_SEPARATION: f64 = 0.15;
pub const HOME: [f64; 3] = [0.5, 0.4, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockColor {
    Red,
    Blue,
    Pink,
}

impl BlockColor {
    pub const ALL: [BlockColor; 3] = [BlockColor::Red, BlockColor::Blue, BlockColor::Pink];

    pub fn name(self) -> &'static str {
        match self {
            BlockColor::Red => "red",
            BlockColor::Blue => "blue",
            BlockColor::Pink => "pink",
        }
    }

    /// Registry name, e.g. `red_block`.
    pub fn object_name(self) -> &'static str {
        match self {
            BlockColor::Red => "red_block",
            BlockColor::Blue => "blue_block",
            BlockColor::Pink => "pink_block",
        }
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            BlockColor::Red => [220, 40, 40],
            BlockColor::Blue => [40, 80, 220],
            BlockColor::Pink => [240, 120, 200],
        }
    }
}

impl fmt::Display for BlockColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything that can be detected and cropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SceneObject {
    Block(BlockColor),
    Drawer,
    Slider,
    Lightbulb,
    Led,
}

impl SceneObject {
    pub const ALL: [SceneObject; 7] = [
        SceneObject::Block(BlockColor::Red),
        SceneObject::Block(BlockColor::Blue),
        SceneObject::Block(BlockColor::Pink),
        SceneObject::Drawer,
        SceneObject::Slider,
        SceneObject::Lightbulb,
        SceneObject::Led,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneObject::Block(c) => c.object_name(),
            SceneObject::Drawer => "drawer",
            SceneObject::Slider => "slider",
            SceneObject::Lightbulb => "lightbulb",
            SceneObject::Led => "led",
        }
    }
}

impl FromStr for SceneObject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SceneObject::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| format!("unknown object `{s}`"))
    }
}

/// Names of every object an annotation may mention.
pub fn object_registry() -> Vec<&'static str> {
    SceneObject::ALL.iter().map(|o| o.name()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub color: BlockColor,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub position: [f64; 3],
    pub rotation: [f64; 3],
    pub closed: bool,
    pub held: Option<BlockColor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub env_id: EnvId,
    pub gripper: Gripper,
    /// One block per color, in [`BlockColor::ALL`] order.
    pub blocks: Vec<Block>,
    pub drawer_open: f64,
    pub slider_pos: f64,
    /// Drives the lightbulb.
    pub switch_on: bool,
    pub led_on: bool,
    pub step_count: u64,
}

fn dist_xy(a: [f64; 3], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl WorldState {
    pub fn profile(&self) -> &'static EnvProfile {
        EnvProfile::get(self.env_id)
    }

    pub fn block(&self, color: BlockColor) -> &Block {
        &self.blocks[color as usize]
    }

    pub fn is_held(&self, color: BlockColor) -> bool {
        self.gripper.held == Some(color)
    }

    pub fn proprio(&self) -> Proprio {
        Proprio {
            position: self.gripper.position,
            rotation: self.gripper.rotation,
            closed: self.gripper.closed,
        }
    }

    pub fn drawer_handle(&self) -> [f64; 2] {
        self.profile().drawer_handle_at(self.drawer_open)
    }

    pub fn slider_handle(&self) -> [f64; 2] {
        self.profile().slider_handle(self.slider_pos)
    }

    /// True when a closed, empty gripper sits low on the given handle.
    pub fn engaged_with(&self, handle: [f64; 2]) -> bool {
        let g = &self.gripper;
        g.closed && g.held.is_none() && g.position[2] < HANDLE_HEIGHT && dist_xy(g.position, handle) < GRASP_RADIUS
    }
}

/// Deterministic initial state for `(profile, seed)`.
pub fn reset(profile: &EnvProfile, seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f65_7661_5f73_696d);
    let [x0, y0, x1, y1] = profile.block_region;
    let mut blocks: Vec<Block> = Vec::with_capacity(3);
    for color in BlockColor::ALL {
        let position = loop {
            let p = [rng.gen_range(x0..x1), rng.gen_range(y0..y1), 0.0];
            if blocks
                .iter()
                .all(|b| dist_xy(b.position, [p[0], p[1]]) >= MIN_BLOCK_SEPARATION)
            {
                break p;
            }
        };
        blocks.push(Block { color, position });
    }
    let two_sided = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            rng.gen_range(0.0..0.2)
        } else {
            rng.gen_range(0.8..1.0)
        }
    };
    let drawer_open = two_sided(&mut rng);
    let slider_pos = two_sided(&mut rng);
    WorldState {
        env_id: profile.env_id,
        gripper: Gripper {
            position: HOME,
            rotation: [0.0; 3],
            closed: false,
            held: None,
        },
        blocks,
        drawer_open,
        slider_pos,
        switch_on: rng.gen_bool(0.5),
        led_on: rng.gen_bool(0.5),
        step_count: 0,
    }
}

/// Advances the world by one normalized action.
pub fn step(state: &WorldState, action: &Action) -> WorldState {
    let profile = state.profile();
    let mut next = state.clone();
    let a = &action.0;
    let prev = state.gripper.position;
    let mut pos = prev;
    for i in 0..3 {
        let v = if a[i].is_finite() { a[i].clamp(-1.0, 1.0) } else { 0.0 };
        pos[i] = (prev[i] + v * DELTA).clamp(0.0, 1.0);
    }
    for i in 0..3 {
        let v = if a[3 + i].is_finite() {
            a[3 + i].clamp(-1.0, 1.0)
        } else {
            0.0
        };
        next.gripper.rotation[i] += v * DELTA;
    }
    let want_closed = a[6] < 0.0;
    let was_closed = state.gripper.closed;
    next.gripper.position = pos;

    // Handles follow a closed, empty gripper that starts the step on them.
    if was_closed && want_closed && state.gripper.held.is_none() {
        if state.engaged_with(state.drawer_handle()) {
            next.drawer_open = (state.drawer_open - (pos[1] - prev[1]) / DRAWER_TRAVEL).clamp(0.0, 1.0);
        } else if state.engaged_with(state.slider_handle()) {
            next.slider_pos = (state.slider_pos + (pos[0] - prev[0]) / SLIDER_TRAVEL).clamp(0.0, 1.0);
        }
    }

    // An open, low gripper shoves any block it lands next to.
    if !was_closed && !want_closed && pos[2] < PUSH_HEIGHT {
        let (dx, dy) = (pos[0] - prev[0], pos[1] - prev[1]);
        for block in next.blocks.iter_mut() {
            if dist_xy(pos, [block.position[0], block.position[1]]) < GRASP_RADIUS {
                block.position[0] = (block.position[0] + dx).clamp(0.0, 1.0);
                block.position[1] = (block.position[1] + dy).clamp(0.0, 1.0);
            }
        }
    }

    if prev[2] >= PRESS_HEIGHT && pos[2] < PRESS_HEIGHT {
        if dist_xy(pos, profile.switch) < GRASP_RADIUS {
            next.switch_on = !next.switch_on;
        }
        if dist_xy(pos, profile.button) < GRASP_RADIUS {
            next.led_on = !next.led_on;
        }
    }

    if want_closed && !was_closed {
        next.gripper.closed = true;
        next.gripper.held = next
            .blocks
            .iter()
            .map(|b| (b.color, dist3(pos, b.position)))
            .filter(|(_, d)| *d < GRASP_RADIUS)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c);
    } else if !want_closed && was_closed {
        next.gripper.closed = false;
        if let Some(color) = next.gripper.held.take() {
            next.blocks[color as usize].position[2] = 0.0;
        }
    }
    if let Some(color) = next.gripper.held {
        next.blocks[color as usize].position = pos;
    }
    next.step_count += 1;
    next
}

/// Replays an action log from a reset, returning every visited state.
pub fn replay(initial: &WorldState, actions: &[Action]) -> Vec<WorldState> {
    let mut states = Vec::with_capacity(actions.len() + 1);
    states.push(initial.clone());
    for a in actions {
        let s = step(states.last().expect("non-empty"), a);
        states.push(s);
    }
    states
}
