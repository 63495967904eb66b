//! Visual and layout variants of the scene, loaded from `profiles.json`.

use std::sync::OnceLock;

use oevla_core::EnvId;
use serde::{Deserialize, Serialize};

const PROFILES_JSON: &str = include_str!("../profiles.json");

/// Top-down orthographic camera. `margin` is in pixels at 128 px resolution
/// and scales with the render size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Camera {
    pub mirror_x: bool,
    pub margin: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvProfile {
    pub env_id: EnvId,
    pub table_color: [u8; 3],
    /// Handle position with the drawer fully closed; opening moves it toward -y.
    pub drawer_handle: [f64; 2],
    /// Slider handle position at `slider_pos = 0`; the handle travels toward +x.
    pub slider_origin: [f64; 2],
    /// Press region toggling the lightbulb.
    pub switch: [f64; 2],
    /// Where the lightbulb is drawn.
    pub lightbulb: [f64; 2],
    /// Press region of the LED button, also where the LED is drawn.
    pub button: [f64; 2],
    /// `[x_min, y_min, x_max, y_max]` for block placement.
    pub block_region: [f64; 4],
    pub camera: Camera,
}

#[derive(Debug, Deserialize)]
struct ProfileFile {
    profiles: Vec<EnvProfile>,
    alternate_camera: Camera,
}

fn registry() -> &'static ProfileFile {
    static REGISTRY: OnceLock<ProfileFile> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let file: ProfileFile = serde_json::from_str(PROFILES_JSON).expect("bundled profiles.json is valid");
        for (i, env) in EnvId::ALL.iter().enumerate() {
            assert_eq!(
                file.profiles[i].env_id, *env,
                "profiles.json must list A, B, C, D in order"
            );
        }
        file
    })
}

impl EnvProfile {
    pub fn get(env: EnvId) -> &'static EnvProfile {
        &registry().profiles[env.index()]
    }

    pub fn all() -> &'static [EnvProfile] {
        &registry().profiles
    }

    /// Viewpoint used for hard-mode media rendered from another environment.
    pub fn alternate_camera() -> Camera {
        registry().alternate_camera
    }

    pub fn with_camera(&self, camera: Camera) -> EnvProfile {
        EnvProfile { camera, ..self.clone() }
    }

    pub fn slider_handle(&self, slider_pos: f64) -> [f64; 2] {
        [
            self.slider_origin[0] + crate::world::SLIDER_TRAVEL * slider_pos,
            self.slider_origin[1],
        ]
    }

    pub fn drawer_handle_at(&self, drawer_open: f64) -> [f64; 2] {
        [
            self.drawer_handle[0],
            self.drawer_handle[1] - crate::world::DRAWER_TRAVEL * drawer_open,
        ]
    }
}
