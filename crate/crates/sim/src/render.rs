//! Integer rasterizer for the static and wrist cameras.
//!
//! World coordinates are mapped to pixels once per primitive; everything
//! after that is integer fills, so renders are byte-stable across platforms.
//! Sizes are specified at 128 px and scale linearly with the resolution.

use std::str::FromStr;

use image::{Rgb, RgbImage};
use oevla_core::concat_views;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{Camera, EnvProfile};
use crate::world::{SceneObject, WorldState};

pub const MIN_RESOLUTION: u32 = 32;
pub const DEFAULT_RESOLUTION: u32 = 128;

pub const BLOCK_PX: u32 = 12;
const GRIPPER_PX: u32 = 10;
const HANDLE_PX: (u32, u32) = (10, 4);
const KNOB_PX: (u32, u32) = (8, 6);
const SWITCH_PX: u32 = 6;
const BULB_RADIUS_PX: u32 = 5;
const LED_RADIUS_PX: u32 = 4;

pub const LED_ON: [u8; 3] = [0, 200, 0];
pub const LED_OFF: [u8; 3] = [60, 60, 60];
pub const BULB_ON: [u8; 3] = [255, 220, 0];
pub const BULB_OFF: [u8; 3] = [90, 90, 90];
const DRAWER_BODY: [u8; 3] = [150, 100, 60];
const DRAWER_FRONT: [u8; 3] = [110, 70, 40];
const HANDLE: [u8; 3] = [60, 40, 20];
const TRACK: [u8; 3] = [120, 120, 120];
const KNOB: [u8; 3] = [30, 30, 110];
const SWITCH: [u8; 3] = [40, 40, 40];
const GRIPPER: [u8; 3] = [20, 20, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Static,
    Wrist,
}

impl FromStr for View {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "static" => Ok(View::Static),
            "wrist" => Ok(View::Wrist),
            _ => Err(format!("unknown view `{s}` (expected static or wrist)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("resolution {0} below the minimum of {MIN_RESOLUTION}")]
    Resolution(u32),
    #[error("{0} is not visible in the {1:?} view")]
    OffView(&'static str, View),
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u32 {
        self.width() * self.height()
    }
}

/// Signed rectangle before clipping.
#[derive(Debug, Clone, Copy)]
struct Rect {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

impl Rect {
    fn centered(cx: i64, cy: i64, w: i64, h: i64) -> Rect {
        Rect {
            x0: cx - w / 2,
            y0: cy - h / 2,
            x1: cx - w / 2 + w,
            y1: cy - h / 2 + h,
        }
    }

    fn clip(&self, w: u32, h: u32) -> Option<BBox> {
        let x0 = self.x0.clamp(0, i64::from(w));
        let x1 = self.x1.clamp(0, i64::from(w));
        let y0 = self.y0.clamp(0, i64::from(h));
        let y1 = self.y1.clamp(0, i64::from(h));
        (x0 < x1 && y0 < y1).then_some(BBox {
            x0: x0 as u32,
            y0: y0 as u32,
            x1: x1 as u32,
            y1: y1 as u32,
        })
    }
}

struct Painter {
    img: RgbImage,
    res: u32,
    camera: Camera,
}

impl Painter {
    fn new(res: u32, camera: Camera, background: [u8; 3]) -> Self {
        Painter {
            img: RgbImage::from_pixel(res, res, Rgb(background)),
            res,
            camera,
        }
    }

    fn px(res: u32, v: u32) -> i64 {
        i64::from((v * res / DEFAULT_RESOLUTION).max(1))
    }

    fn scale(&self, v: u32) -> i64 {
        Self::px(self.res, v)
    }

    fn to_px(res: u32, camera: Camera, x: f64, y: f64) -> (i64, i64) {
        let m = Self::px(res, camera.margin);
        let inner = (i64::from(res) - 2 * m) as f64;
        let fx = if camera.mirror_x { 1.0 - x } else { x };
        let px = m + (fx.clamp(0.0, 1.0) * inner).floor() as i64;
        let py = m + ((1.0 - y).clamp(0.0, 1.0) * inner).floor() as i64;
        (px.min(i64::from(res) - 1), py.min(i64::from(res) - 1))
    }

    fn at(&self, x: f64, y: f64) -> (i64, i64) {
        Self::to_px(self.res, self.camera, x, y)
    }

    fn fill(&mut self, r: Rect, color: [u8; 3]) {
        if let Some(b) = r.clip(self.res, self.res) {
            for y in b.y0..b.y1 {
                for x in b.x0..b.x1 {
                    self.img.put_pixel(x, y, Rgb(color));
                }
            }
        }
    }

    fn outline(&mut self, r: Rect, thickness: i64, color: [u8; 3]) {
        let t = thickness;
        self.fill(Rect { y1: r.y0 + t, ..r }, color);
        self.fill(Rect { y0: r.y1 - t, ..r }, color);
        self.fill(Rect { x1: r.x0 + t, ..r }, color);
        self.fill(Rect { x0: r.x1 - t, ..r }, color);
    }

    fn disc(&mut self, cx: i64, cy: i64, radius: i64, color: [u8; 3]) {
        for (x, y) in disc_pixels(cx, cy, radius, self.res) {
            self.img.put_pixel(x, y, Rgb(color));
        }
    }
}

/// Pixels `(x, y)` with `(x-cx)^2 + (y-cy)^2 <= r^2`, clipped to the image.
fn disc_pixels(cx: i64, cy: i64, r: i64, res: u32) -> impl Iterator<Item = (u32, u32)> {
    let res = i64::from(res);
    (cy - r..=cy + r).flat_map(move |y| {
        (cx - r..=cx + r).filter_map(move |x| {
            let inside = (x - cx).pow(2) + (y - cy).pow(2) <= r * r;
            (inside && (0..res).contains(&x) && (0..res).contains(&y)).then_some((x as u32, y as u32))
        })
    })
}

fn object_rect(state: &WorldState, profile: &EnvProfile, res: u32, camera: Camera, obj: SceneObject) -> Rect {
    let s = |v: u32| Painter::px(res, v);
    let at = |p: [f64; 2]| Painter::to_px(res, camera, p[0], p[1]);
    match obj {
        SceneObject::Block(c) => {
            let p = state.block(c).position;
            let (cx, cy) = at([p[0], p[1]]);
            Rect::centered(cx, cy, s(BLOCK_PX), s(BLOCK_PX))
        }
        SceneObject::Drawer => {
            let (cx, cy) = at(profile.drawer_handle_at(state.drawer_open));
            Rect::centered(cx, cy, s(HANDLE_PX.0), s(HANDLE_PX.1))
        }
        SceneObject::Slider => {
            let (cx, cy) = at(profile.slider_handle(state.slider_pos));
            Rect::centered(cx, cy, s(KNOB_PX.0), s(KNOB_PX.1))
        }
        SceneObject::Lightbulb => {
            let (cx, cy) = at(profile.lightbulb);
            let r = s(BULB_RADIUS_PX);
            Rect {
                x0: cx - r,
                y0: cy - r,
                x1: cx + r + 1,
                y1: cy + r + 1,
            }
        }
        SceneObject::Led => {
            let (cx, cy) = at(profile.button);
            let r = s(LED_RADIUS_PX);
            Rect {
                x0: cx - r,
                y0: cy - r,
                x1: cx + r + 1,
                y1: cy + r + 1,
            }
        }
    }
}

/// Static view of `state` drawn with an explicit profile and camera.
pub fn render_static_with(state: &WorldState, profile: &EnvProfile, res: u32) -> Result<RgbImage, RenderError> {
    if res < MIN_RESOLUTION {
        return Err(RenderError::Resolution(res));
    }
    let mut p = Painter::new(res, profile.camera, profile.table_color);

    // drawer: body between the closed and current handle positions
    let closed = p.at(profile.drawer_handle[0], profile.drawer_handle[1]);
    let handle = profile.drawer_handle_at(state.drawer_open);
    let open = p.at(handle[0], handle[1]);
    let half_w = p.scale(10);
    p.fill(
        Rect {
            x0: closed.0 - half_w,
            y0: closed.1.min(open.1),
            x1: closed.0 + half_w,
            y1: closed.1.max(open.1) + 1,
        },
        DRAWER_BODY,
    );
    let front_h = p.scale(3);
    p.fill(
        Rect::centered(closed.0, closed.1 - front_h, 2 * half_w + p.scale(4), front_h),
        DRAWER_FRONT,
    );
    p.fill(
        object_rect(state, profile, res, profile.camera, SceneObject::Drawer),
        HANDLE,
    );

    // slider: track then knob
    let (t0, ty) = p.at(profile.slider_origin[0], profile.slider_origin[1]);
    let end = profile.slider_handle(1.0);
    let (t1, _) = p.at(end[0], end[1]);
    let track_h = p.scale(2);
    p.fill(
        Rect {
            x0: t0.min(t1),
            y0: ty - track_h / 2,
            x1: t0.max(t1) + 1,
            y1: ty - track_h / 2 + track_h,
        },
        TRACK,
    );
    p.fill(
        object_rect(state, profile, res, profile.camera, SceneObject::Slider),
        KNOB,
    );

    let (sx, sy) = p.at(profile.switch[0], profile.switch[1]);
    let sw = p.scale(SWITCH_PX);
    p.fill(Rect::centered(sx, sy, sw, sw), SWITCH);
    let (bx, by) = p.at(profile.lightbulb[0], profile.lightbulb[1]);
    let r = p.scale(BULB_RADIUS_PX);
    p.disc(bx, by, r, if state.switch_on { BULB_ON } else { BULB_OFF });
    let (lx, ly) = p.at(profile.button[0], profile.button[1]);
    let r = p.scale(LED_RADIUS_PX);
    p.disc(lx, ly, r, if state.led_on { LED_ON } else { LED_OFF });

    let mut order: Vec<_> = state.blocks.iter().collect();
    order.sort_by(|a, b| a.position[2].total_cmp(&b.position[2]).then(a.color.cmp(&b.color)));
    for block in order {
        let rect = object_rect(state, profile, res, profile.camera, SceneObject::Block(block.color));
        p.fill(rect, block.color.rgb());
    }

    let g = state.gripper.position;
    let (gx, gy) = p.at(g[0], g[1]);
    let size = p.scale(GRIPPER_PX);
    let thickness = if state.gripper.closed { p.scale(2) } else { p.scale(1) };
    p.outline(Rect::centered(gx, gy, size, size), thickness, GRIPPER);
    Ok(p.img)
}

/// Top-left corner and side of the static-view window the wrist camera sees.
fn wrist_window(state: &WorldState, profile: &EnvProfile, res: u32) -> (u32, u32, u32) {
    let side = res / 4;
    let g = state.gripper.position;
    let (gx, gy) = Painter::to_px(res, profile.camera, g[0], g[1]);
    let max = i64::from(res - side);
    let x0 = (gx - i64::from(side / 2)).clamp(0, max) as u32;
    let y0 = (gy - i64::from(side / 2)).clamp(0, max) as u32;
    (x0, y0, side)
}

pub fn render_with(state: &WorldState, profile: &EnvProfile, view: View, res: u32) -> Result<RgbImage, RenderError> {
    let full = render_static_with(state, profile, res)?;
    match view {
        View::Static => Ok(full),
        View::Wrist => {
            let (x0, y0, side) = wrist_window(state, profile, res);
            Ok(RgbImage::from_fn(res, res, |x, y| {
                *full.get_pixel(x0 + x * side / res, y0 + y * side / res)
            }))
        }
    }
}

/// Renders `state` in its own environment profile.
pub fn render(state: &WorldState, view: View, res: u32) -> Result<RgbImage, RenderError> {
    render_with(state, state.profile(), view, res)
}

/// Static and wrist views side by side, the policy's observation image.
pub fn render_observation(state: &WorldState, res: u32) -> Result<RgbImage, RenderError> {
    let s = render(state, View::Static, res)?;
    let w = render(state, View::Wrist, res)?;
    Ok(concat_views(&s, &w).expect("both views share the resolution"))
}

/// Tight pixel box around an object's drawn footprint (occlusion ignored).
pub fn object_bbox_with(
    state: &WorldState,
    profile: &EnvProfile,
    obj: SceneObject,
    view: View,
    res: u32,
) -> Result<BBox, RenderError> {
    if res < MIN_RESOLUTION {
        return Err(RenderError::Resolution(res));
    }
    let rect = object_rect(state, profile, res, profile.camera, obj);
    let stat = rect.clip(res, res).ok_or(RenderError::OffView(obj.name(), view))?;
    match view {
        View::Static => Ok(stat),
        View::Wrist => {
            let (wx0, wy0, side) = wrist_window(state, profile, res);
            let inter = Rect {
                x0: i64::from(stat.x0.max(wx0)),
                y0: i64::from(stat.y0.max(wy0)),
                x1: i64::from(stat.x1.min(wx0 + side)),
                y1: i64::from(stat.y1.min(wy0 + side)),
            };
            if inter.x0 >= inter.x1 || inter.y0 >= inter.y1 {
                return Err(RenderError::OffView(obj.name(), view));
            }
            // wrist pixel x shows static column x0 + floor(x * side / res)
            let to_wrist_lo =
                |v: i64, o: u32| ((v - i64::from(o)) * i64::from(res) + i64::from(side) - 1) / i64::from(side);
            let r = Rect {
                x0: to_wrist_lo(inter.x0, wx0),
                y0: to_wrist_lo(inter.y0, wy0),
                x1: to_wrist_lo(inter.x1, wx0),
                y1: to_wrist_lo(inter.y1, wy0),
            };
            r.clip(res, res).ok_or(RenderError::OffView(obj.name(), view))
        }
    }
}

pub fn object_bbox(state: &WorldState, obj: SceneObject, view: View, res: u32) -> Result<BBox, RenderError> {
    object_bbox_with(state, state.profile(), obj, view, res)
}
