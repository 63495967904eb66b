//! The closed task registry: language templates, success and feasibility.

use std::fmt;
use std::str::FromStr;

use oevla_core::{CoreError, LanguageAnnotation};
use serde::{Deserialize, Serialize};

use crate::world::{BlockColor, WorldState};

pub const LIFT_HEIGHT: f64 = 0.15;
pub const PUSH_DISTANCE: f64 = 0.1;
/// Blocks must lie within these x bounds for a push to be feasible.
pub const PUSH_LEFT_RANGE: (f64, f64) = (0.3, 0.9);
pub const PUSH_RIGHT_RANGE: (f64, f64) = (0.1, 0.7);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskId {
    LiftRedBlock,
    LiftBlueBlock,
    LiftPinkBlock,
    PushBlockLeft,
    PushBlockRight,
    OpenDrawer,
    CloseDrawer,
    MoveSliderLeft,
    MoveSliderRight,
    TurnOnLightbulb,
    TurnOffLightbulb,
    TurnOnLed,
    TurnOffLed,
}

impl TaskId {
    pub const ALL: [TaskId; 13] = [
        TaskId::LiftRedBlock,
        TaskId::LiftBlueBlock,
        TaskId::LiftPinkBlock,
        TaskId::PushBlockLeft,
        TaskId::PushBlockRight,
        TaskId::OpenDrawer,
        TaskId::CloseDrawer,
        TaskId::MoveSliderLeft,
        TaskId::MoveSliderRight,
        TaskId::TurnOnLightbulb,
        TaskId::TurnOffLightbulb,
        TaskId::TurnOnLed,
        TaskId::TurnOffLed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::LiftRedBlock => "lift_red_block",
            TaskId::LiftBlueBlock => "lift_blue_block",
            TaskId::LiftPinkBlock => "lift_pink_block",
            TaskId::PushBlockLeft => "push_block_left",
            TaskId::PushBlockRight => "push_block_right",
            TaskId::OpenDrawer => "open_drawer",
            TaskId::CloseDrawer => "close_drawer",
            TaskId::MoveSliderLeft => "move_slider_left",
            TaskId::MoveSliderRight => "move_slider_right",
            TaskId::TurnOnLightbulb => "turn_on_lightbulb",
            TaskId::TurnOffLightbulb => "turn_off_lightbulb",
            TaskId::TurnOnLed => "turn_on_led",
            TaskId::TurnOffLed => "turn_off_led",
        }
    }

    pub fn lift_color(self) -> Option<BlockColor> {
        match self {
            TaskId::LiftRedBlock => Some(BlockColor::Red),
            TaskId::LiftBlueBlock => Some(BlockColor::Blue),
            TaskId::LiftPinkBlock => Some(BlockColor::Pink),
            _ => None,
        }
    }

    /// Marked template (see [`LanguageAnnotation::from_marked`]). Push tasks
    /// name the block chosen by [`push_target`] in `state`.
    pub fn marked_template(self, state: &WorldState) -> String {
        let block = |c: BlockColor| format!("{{{}:{} block}}", c.object_name(), c.name());
        match self {
            TaskId::LiftRedBlock | TaskId::LiftBlueBlock | TaskId::LiftPinkBlock => {
                format!("lift the {}", block(self.lift_color().expect("lift task")))
            }
            TaskId::PushBlockLeft | TaskId::PushBlockRight => {
                let dir = if self == TaskId::PushBlockLeft { "left" } else { "right" };
                match push_target(self, state) {
                    Some(c) => format!("push the {} to the {dir}", block(c)),
                    None => format!("push the block to the {dir}"),
                }
            }
            TaskId::OpenDrawer => "open the {drawer:drawer}".into(),
            TaskId::CloseDrawer => "close the {drawer:drawer}".into(),
            TaskId::MoveSliderLeft => "move the {slider:slider} to the left".into(),
            TaskId::MoveSliderRight => "move the {slider:slider} to the right".into(),
            TaskId::TurnOnLightbulb => "turn on the {lightbulb:lightbulb}".into(),
            TaskId::TurnOffLightbulb => "turn off the {lightbulb:lightbulb}".into(),
            TaskId::TurnOnLed => "turn on the {led:led}".into(),
            TaskId::TurnOffLed => "turn off the {led:led}".into(),
        }
    }

    pub fn annotation(self, state: &WorldState) -> Result<LanguageAnnotation, CoreError> {
        LanguageAnnotation::from_marked(&self.marked_template(state))
    }

    /// Recovers the task from a plain-language instruction produced by the templates.
    pub fn parse_instruction(text: &str) -> Option<TaskId> {
        let t = text.trim().to_ascii_lowercase();
        let t = t.trim_end_matches('.');
        if let Some(rest) = t.strip_prefix("lift the ") {
            return match rest {
                "red block" => Some(TaskId::LiftRedBlock),
                "blue block" => Some(TaskId::LiftBlueBlock),
                "pink block" => Some(TaskId::LiftPinkBlock),
                _ => None,
            };
        }
        if t.starts_with("push the ") {
            if t.ends_with(" to the left") {
                return Some(TaskId::PushBlockLeft);
            }
            if t.ends_with(" to the right") {
                return Some(TaskId::PushBlockRight);
            }
            return None;
        }
        match t {
            "open the drawer" => Some(TaskId::OpenDrawer),
            "close the drawer" => Some(TaskId::CloseDrawer),
            "move the slider to the left" => Some(TaskId::MoveSliderLeft),
            "move the slider to the right" => Some(TaskId::MoveSliderRight),
            "turn on the lightbulb" => Some(TaskId::TurnOnLightbulb),
            "turn off the lightbulb" => Some(TaskId::TurnOffLightbulb),
            "turn on the led" => Some(TaskId::TurnOnLed),
            "turn off the led" => Some(TaskId::TurnOffLed),
            _ => None,
        }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskId::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

fn push_eligible(task: TaskId, state: &WorldState, color: BlockColor) -> bool {
    if state.is_held(color) {
        return false;
    }
    let x = state.block(color).position[0];
    let (lo, hi) = if task == TaskId::PushBlockLeft {
        PUSH_LEFT_RANGE
    } else {
        PUSH_RIGHT_RANGE
    };
    (lo..=hi).contains(&x)
}

/// First block (red, blue, pink order) a push task would move.
pub fn push_target(task: TaskId, state: &WorldState) -> Option<BlockColor> {
    BlockColor::ALL.into_iter().find(|&c| push_eligible(task, state, c))
}

/// Whether `task` has been accomplished between `initial` and `current`.
pub fn success(task: TaskId, initial: &WorldState, current: &WorldState) -> bool {
    match task {
        TaskId::LiftRedBlock | TaskId::LiftBlueBlock | TaskId::LiftPinkBlock => {
            let c = task.lift_color().expect("lift task");
            current.is_held(c) && current.block(c).position[2] >= initial.block(c).position[2] + LIFT_HEIGHT
        }
        TaskId::PushBlockLeft | TaskId::PushBlockRight => {
            let sign = if task == TaskId::PushBlockLeft { -1.0 } else { 1.0 };
            BlockColor::ALL.into_iter().any(|c| {
                !initial.is_held(c)
                    && !current.is_held(c)
                    && sign * (current.block(c).position[0] - initial.block(c).position[0]) >= PUSH_DISTANCE
            })
        }
        TaskId::OpenDrawer => current.drawer_open >= 0.8 && initial.drawer_open < 0.5,
        TaskId::CloseDrawer => current.drawer_open <= 0.2 && initial.drawer_open > 0.5,
        TaskId::MoveSliderLeft => current.slider_pos <= 0.2 && initial.slider_pos > 0.5,
        TaskId::MoveSliderRight => current.slider_pos >= 0.8 && initial.slider_pos < 0.5,
        TaskId::TurnOnLightbulb => current.switch_on && !initial.switch_on,
        TaskId::TurnOffLightbulb => !current.switch_on && initial.switch_on,
        TaskId::TurnOnLed => current.led_on && !initial.led_on,
        TaskId::TurnOffLed => !current.led_on && initial.led_on,
    }
}

/// Whether `task` can be started from `state`.
pub fn feasible(task: TaskId, state: &WorldState) -> bool {
    match task {
        TaskId::LiftRedBlock | TaskId::LiftBlueBlock | TaskId::LiftPinkBlock => {
            !state.is_held(task.lift_color().expect("lift task"))
        }
        TaskId::PushBlockLeft | TaskId::PushBlockRight => push_target(task, state).is_some(),
        TaskId::OpenDrawer => state.drawer_open < 0.5,
        TaskId::CloseDrawer => state.drawer_open > 0.5,
        TaskId::MoveSliderLeft => state.slider_pos > 0.5,
        TaskId::MoveSliderRight => state.slider_pos < 0.5,
        TaskId::TurnOnLightbulb => !state.switch_on,
        TaskId::TurnOffLightbulb => state.switch_on,
        TaskId::TurnOnLed => !state.led_on,
        TaskId::TurnOffLed => state.led_on,
    }
}

pub fn feasible_tasks(state: &WorldState) -> Vec<TaskId> {
    TaskId::ALL.into_iter().filter(|&t| feasible(t, state)).collect()
}
