//! Embedded 5x7 bitmap font and text-to-image rendering for OIF instructions.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ForgeError, Result};

pub const GLYPH_W: u32 = 5;
pub const GLYPH_H: u32 = 7;
/// Horizontal and vertical advance in font pixels (one blank column/row).
const ADVANCE_X: u32 = GLYPH_W + 1;
const ADVANCE_Y: u32 = GLYPH_H + 2;

/// Printable ASCII 0x20..=0x7e, one byte per column, bit 0 at the top.
const FONT: [[u8; 5]; 95] = [
    [0x00, 0x00, 0x00, 0x00, 0x00], // ' '
    [0x00, 0x00, 0x5f, 0x00, 0x00], // !
    [0x00, 0x07, 0x00, 0x07, 0x00], // "
    [0x14, 0x7f, 0x14, 0x7f, 0x14], // #
    [0x24, 0x2a, 0x7f, 0x2a, 0x12], // $
    [0x23, 0x13, 0x08, 0x64, 0x62], // %
    [0x36, 0x49, 0x55, 0x22, 0x50], // &
    [0x00, 0x05, 0x03, 0x00, 0x00], // '
    [0x00, 0x1c, 0x22, 0x41, 0x00], // (
    [0x00, 0x41, 0x22, 0x1c, 0x00], // )
    [0x14, 0x08, 0x3e, 0x08, 0x14], // *
    [0x08, 0x08, 0x3e, 0x08, 0x08], // +
    [0x00, 0x50, 0x30, 0x00, 0x00], // ,
    [0x08, 0x08, 0x08, 0x08, 0x08], // -
    [0x00, 0x60, 0x60, 0x00, 0x00], // .
    [0x20, 0x10, 0x08, 0x04, 0x02], // /
    [0x3e, 0x51, 0x49, 0x45, 0x3e], // 0
    [0x00, 0x42, 0x7f, 0x40, 0x00], // 1
    [0x42, 0x61, 0x51, 0x49, 0x46], // 2
    [0x21, 0x41, 0x45, 0x4b, 0x31], // 3
    [0x18, 0x14, 0x12, 0x7f, 0x10], // 4
    [0x27, 0x45, 0x45, 0x45, 0x39], // 5
    [0x3c, 0x4a, 0x49, 0x49, 0x30], // 6
    [0x01, 0x71, 0x09, 0x05, 0x03], // 7
    [0x36, 0x49, 0x49, 0x49, 0x36], // 8
    [0x06, 0x49, 0x49, 0x29, 0x1e], // 9
    [0x00, 0x36, 0x36, 0x00, 0x00], // :
    [0x00, 0x56, 0x36, 0x00, 0x00], // ;
    [0x08, 0x14, 0x22, 0x41, 0x00], // <
    [0x14, 0x14, 0x14, 0x14, 0x14], // =
    [0x00, 0x41, 0x22, 0x14, 0x08], // >
    [0x02, 0x01, 0x51, 0x09, 0x06], // ?
    [0x32, 0x49, 0x79, 0x41, 0x3e], // @
    [0x7e, 0x11, 0x11, 0x11, 0x7e], // A
    [0x7f, 0x49, 0x49, 0x49, 0x36], // B
    [0x3e, 0x41, 0x41, 0x41, 0x22], // C
    [0x7f, 0x41, 0x41, 0x22, 0x1c], // D
    [0x7f, 0x49, 0x49, 0x49, 0x41], // E
    [0x7f, 0x09, 0x09, 0x01, 0x01], // F
    [0x3e, 0x41, 0x41, 0x51, 0x32], // G
    [0x7f, 0x08, 0x08, 0x08, 0x7f], // H
    [0x00, 0x41, 0x7f, 0x41, 0x00], // I
    [0x20, 0x40, 0x41, 0x3f, 0x01], // J
    [0x7f, 0x08, 0x14, 0x22, 0x41], // K
    [0x7f, 0x40, 0x40, 0x40, 0x40], // L
    [0x7f, 0x02, 0x04, 0x02, 0x7f], // M
    [0x7f, 0x04, 0x08, 0x10, 0x7f], // N
    [0x3e, 0x41, 0x41, 0x41, 0x3e], // O
    [0x7f, 0x09, 0x09, 0x09, 0x06], // P
    [0x3e, 0x41, 0x51, 0x21, 0x5e], // Q
    [0x7f, 0x09, 0x19, 0x29, 0x46], // R
    [0x46, 0x49, 0x49, 0x49, 0x31], // S
    [0x01, 0x01, 0x7f, 0x01, 0x01], // T
    [0x3f, 0x40, 0x40, 0x40, 0x3f], // U
    [0x1f, 0x20, 0x40, 0x20, 0x1f], // V
    [0x7f, 0x20, 0x18, 0x20, 0x7f], // W
    [0x63, 0x14, 0x08, 0x14, 0x63], // X
    [0x03, 0x04, 0x78, 0x04, 0x03], // Y
    [0x61, 0x51, 0x49, 0x45, 0x43], // Z
    [0x00, 0x7f, 0x41, 0x41, 0x00], // [
    [0x02, 0x04, 0x08, 0x10, 0x20], // backslash
    [0x00, 0x41, 0x41, 0x7f, 0x00], // ]
    [0x04, 0x02, 0x01, 0x02, 0x04], // ^
    [0x40, 0x40, 0x40, 0x40, 0x40], // _
    [0x00, 0x01, 0x02, 0x04, 0x00], // `
    [0x20, 0x54, 0x54, 0x54, 0x78], // a
    [0x7f, 0x48, 0x44, 0x44, 0x38], // b
    [0x38, 0x44, 0x44, 0x44, 0x20], // c
    [0x38, 0x44, 0x44, 0x48, 0x7f], // d
    [0x38, 0x54, 0x54, 0x54, 0x18], // e
    [0x08, 0x7e, 0x09, 0x01, 0x02], // f
    [0x0c, 0x52, 0x52, 0x52, 0x3e], // g
    [0x7f, 0x08, 0x04, 0x04, 0x78], // h
    [0x00, 0x44, 0x7d, 0x40, 0x00], // i
    [0x20, 0x40, 0x44, 0x3d, 0x00], // j
    [0x7f, 0x10, 0x28, 0x44, 0x00], // k
    [0x00, 0x41, 0x7f, 0x40, 0x00], // l
    [0x7c, 0x04, 0x18, 0x04, 0x78], // m
    [0x7c, 0x08, 0x04, 0x04, 0x78], // n
    [0x38, 0x44, 0x44, 0x44, 0x38], // o
    [0x7c, 0x14, 0x14, 0x14, 0x08], // p
    [0x08, 0x14, 0x14, 0x18, 0x7c], // q
    [0x7c, 0x08, 0x04, 0x04, 0x08], // r
    [0x48, 0x54, 0x54, 0x54, 0x20], // s
    [0x04, 0x3f, 0x44, 0x40, 0x20], // t
    [0x3c, 0x40, 0x40, 0x20, 0x7c], // u
    [0x1c, 0x20, 0x40, 0x20, 0x1c], // v
    [0x3c, 0x40, 0x30, 0x40, 0x3c], // w
    [0x44, 0x28, 0x10, 0x28, 0x44], // x
    [0x0c, 0x50, 0x50, 0x50, 0x3c], // y
    [0x44, 0x64, 0x54, 0x4c, 0x44], // z
    [0x00, 0x08, 0x36, 0x41, 0x00], // {
    [0x00, 0x00, 0x7f, 0x00, 0x00], // |
    [0x00, 0x41, 0x36, 0x08, 0x00], // }
    [0x08, 0x04, 0x08, 0x10, 0x08], // ~
];

/// Column bitmaps for a printable ASCII character.
pub fn glyph(c: char) -> Option<[u8; 5]> {
    let code = c as u32;
    (0x20..=0x7e)
        .contains(&code)
        .then(|| FONT[(code - 0x20) as usize].map(|col| col & 0x7f))
}

/// Number of lit font pixels in `text`.
pub fn lit_bits(text: &str) -> u32 {
    text.chars()
        .filter_map(glyph)
        .map(|g| g.iter().map(|c| c.count_ones()).sum::<u32>())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    Plain,
    /// Per-pixel noise plus faint diagonal stripes.
    Textured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextStyle {
    pub width: u32,
    pub height: u32,
    /// Integer glyph magnification.
    pub scale: u32,
    pub fg: [u8; 3],
    pub bg: [u8; 3],
    /// Top-left of the text block, in canvas pixels.
    pub offset: [u32; 2],
    pub background: Background,
    /// Max per-glyph displacement in canvas pixels.
    pub jitter: u32,
    /// Max per-glyph shear, in canvas pixels across the glyph height.
    pub shear: u32,
}

impl TextStyle {
    /// Black on white, regular font.
    pub fn plain() -> Self {
        TextStyle {
            width: 384,
            height: 192,
            scale: 2,
            fg: [0, 0, 0],
            bg: [255, 255, 255],
            offset: [8, 8],
            background: Background::Plain,
            jitter: 0,
            shear: 0,
        }
    }

    /// Plain background with varied colors, size and position.
    pub fn sample_varied(rng: &mut impl Rng) -> Self {
        let dark = [rng.gen_range(0..80), rng.gen_range(0..80), rng.gen_range(0..80)];
        let light = [
            rng.gen_range(200..=255),
            rng.gen_range(200..=255),
            rng.gen_range(200..=255),
        ];
        let (fg, bg) = if rng.gen_bool(0.8) {
            (dark, light)
        } else {
            (light, dark)
        };
        TextStyle {
            scale: if rng.gen_bool(0.7) { 2 } else { 1 },
            fg,
            bg,
            offset: [rng.gen_range(4..=16), rng.gen_range(4..=16)],
            ..TextStyle::plain()
        }
    }

    /// Textured background with jittered, sheared glyphs.
    pub fn sample_hard(rng: &mut impl Rng) -> Self {
        TextStyle {
            fg: [rng.gen_range(0..90), rng.gen_range(0..90), rng.gen_range(0..90)],
            bg: [
                rng.gen_range(160..=230),
                rng.gen_range(160..=230),
                rng.gen_range(160..=230),
            ],
            offset: [rng.gen_range(6..=14), rng.gen_range(6..=14)],
            background: Background::Textured,
            jitter: 2,
            shear: 2,
            ..TextStyle::plain()
        }
    }

    fn margin(&self) -> u32 {
        self.jitter + self.shear
    }
}

/// Greedy word wrap to at most `max_chars` per line.
fn wrap(text: &str, max_chars: usize) -> Option<Vec<String>> {
    let mut lines = Vec::new();
    let mut line = String::new();
    for word in text.split_whitespace() {
        if word.chars().count() > max_chars {
            return None;
        }
        if line.is_empty() {
            line.push_str(word);
        } else if line.chars().count() + 1 + word.chars().count() <= max_chars {
            line.push(' ');
            line.push_str(word);
        } else {
            lines.push(std::mem::take(&mut line));
            line.push_str(word);
        }
    }
    if !line.is_empty() {
        lines.push(line);
    }
    Some(lines)
}

/// Renders `text` with the embedded font. Output depends only on
/// `(text, style, seed)`; the seed drives texture and jitter.
pub fn render_text_image(text: &str, style: &TextStyle, seed: u64) -> Result<RgbImage> {
    if text.trim().is_empty() {
        return Err(ForgeError::BadText("empty text".into()));
    }
    if let Some(c) = text.chars().find(|&c| glyph(c).is_none()) {
        return Err(ForgeError::BadText(format!("no glyph for {c:?}")));
    }
    if style.scale == 0 {
        return Err(ForgeError::Config("text scale must be positive".into()));
    }
    let too_long = || ForgeError::TextTooLong {
        text: text.to_string(),
        width: style.width,
        height: style.height,
        scale: style.scale,
    };
    let s = style.scale;
    let m = style.margin();
    let [ox, oy] = style.offset;
    if ox < m || oy < m {
        return Err(ForgeError::Config(format!(
            "offset must be at least {m} for this jitter"
        )));
    }
    let usable_w = style.width.saturating_sub(ox + m);
    let usable_h = style.height.saturating_sub(oy + m);
    // the last glyph on a line needs no trailing blank column
    let max_chars = ((usable_w + s) / (ADVANCE_X * s)) as usize;
    let lines = wrap(text, max_chars).ok_or_else(too_long)?;
    let block_h = lines.len() as u32 * ADVANCE_Y * s - (ADVANCE_Y - GLYPH_H) * s;
    if max_chars == 0 || block_h > usable_h {
        return Err(too_long());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = RgbImage::from_pixel(style.width, style.height, Rgb(style.bg));
    if style.background == Background::Textured {
        for (x, y, p) in img.enumerate_pixels_mut() {
            let stripe = if (x + y) % 9 < 2 { -24 } else { 0 };
            let n: i32 = rng.gen_range(-20..=20) + stripe;
            p.0 = style.bg.map(|v| (i32::from(v) + n).clamp(0, 255) as u8);
        }
    }
    let jit = style.jitter as i64;
    let shr = style.shear as i64;
    for (li, line) in lines.iter().enumerate() {
        for (ci, c) in line.chars().enumerate() {
            let g = glyph(c).expect("checked above");
            let (dx, dy, k) = if jit > 0 || shr > 0 {
                (
                    rng.gen_range(-jit..=jit),
                    rng.gen_range(-jit..=jit),
                    rng.gen_range(-shr..=shr),
                )
            } else {
                (0, 0, 0)
            };
            let gx = i64::from(ox) + (ci as i64) * i64::from(ADVANCE_X * s) + dx;
            let gy = i64::from(oy) + (li as i64) * i64::from(ADVANCE_Y * s) + dy;
            for (col, bits) in g.iter().enumerate() {
                for row in 0..GLYPH_H {
                    if bits >> row & 1 == 0 {
                        continue;
                    }
                    // shear: rows above the glyph centre lean by up to `k` pixels
                    let lean = k * (i64::from(GLYPH_H / 2) - i64::from(row)) / i64::from(GLYPH_H / 2);
                    let px = gx + col as i64 * i64::from(s) + lean;
                    let py = gy + i64::from(row * s);
                    for yy in 0..i64::from(s) {
                        for xx in 0..i64::from(s) {
                            img.put_pixel((px + xx) as u32, (py + yy) as u32, Rgb(style.fg));
                        }
                    }
                }
            }
        }
    }
    Ok(img)
}
