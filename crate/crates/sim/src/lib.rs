//! Deterministic tabletop simulator with four environment profiles, a closed
//! task registry, a raster renderer and scripted reference policies.

pub mod policy;
pub mod profile;
pub mod render;
pub mod seed;
pub mod task;
pub mod world;

pub use policy::{
    oracle_act, random_act, InstructionOracleFactory, OracleFactory, Policy, PolicyError, PolicyFactory,
    PolicyResponse, RandomFactory, StepObservation, SubtaskContext,
};
pub use profile::{Camera, EnvProfile};
pub use render::{object_bbox, render, render_observation, BBox, RenderError, View};
pub use seed::derive_seed;
pub use task::{feasible, feasible_tasks, push_target, success, TaskId};
pub use world::{replay, reset, step, BlockColor, SceneObject, WorldState};
