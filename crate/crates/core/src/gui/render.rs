use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use font8x8::legacy::BASIC_LEGACY;
use serde::{Deserialize, Serialize};

use super::{Rect, Role, UiNode, UiTree};
use crate::vehicle::Value;
use crate::Digest;

type Rgb = [u8; 3];

const BG: Rgb = [16, 20, 28];
const HEADER_BG: Rgb = [28, 34, 46];
const TEXT: Rgb = [230, 230, 230];
const DARK_TEXT: Rgb = [20, 20, 20];
const BUTTON: Rgb = [52, 73, 94];
const NAV_ACTIVE: Rgb = [70, 110, 150];
const TOGGLE_ON: Rgb = [46, 160, 67];
const TOGGLE_OFF: Rgb = [80, 80, 80];
const FIELD: Rgb = [235, 235, 235];
const LIST: Rgb = [24, 30, 40];
const TRACK: Rgb = [40, 48, 60];
const FILL: Rgb = [60, 130, 200];
const BORDER: Rgb = [150, 160, 170];

/// Row-major RGBA image.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBuffer {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl core::fmt::Debug for PixelBuffer {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "PixelBuffer({}x{}, {:?})", self.width, self.height, self.digest())
    }
}

impl PixelBuffer {
    pub fn new(width: u32, height: u32, rgb: Rgb) -> Self {
        let mut data = vec![255u8; (width * height * 4) as usize];
        for px in data.chunks_exact_mut(4) {
            px[..3].copy_from_slice(&rgb);
        }
        PixelBuffer { width, height, data }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = ((y * self.width + x) * 4) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.data)
    }

    /// Fills `r` clipped to the buffer and to `clip`.
    pub(crate) fn fill(&mut self, r: Rect, clip: Rect, rgb: Rgb) {
        let x0 = r.x.max(clip.x).max(0);
        let y0 = r.y.max(clip.y).max(0);
        let x1 = (r.x + r.w).min(clip.x + clip.w).min(self.width as i32);
        let y1 = (r.y + r.h).min(clip.y + clip.h).min(self.height as i32);
        for y in y0..y1 {
            let row = (y as u32 * self.width) as usize * 4;
            for x in x0..x1 {
                let i = row + x as usize * 4;
                self.data[i..i + 3].copy_from_slice(&rgb);
            }
        }
    }

    fn border(&mut self, r: Rect, rgb: Rgb) {
        self.fill(Rect::new(r.x, r.y, r.w, 1), r, rgb);
        self.fill(Rect::new(r.x, r.y + r.h - 1, r.w, 1), r, rgb);
        self.fill(Rect::new(r.x, r.y, 1, r.h), r, rgb);
        self.fill(Rect::new(r.x + r.w - 1, r.y, 1, r.h), r, rgb);
    }

    /// Draws ASCII text with the 8x8 bitmap font at integer `scale`,
    /// clipped to `clip`. Non-ASCII characters render as `?`.
    pub(crate) fn text(&mut self, x: i32, y: i32, s: &str, scale: i32, clip: Rect, rgb: Rgb) {
        for (k, ch) in s.chars().enumerate() {
            let glyph = BASIC_LEGACY[if ch.is_ascii() { ch as usize } else { b'?' as usize }];
            let gx = x + k as i32 * 8 * scale;
            if gx >= clip.x + clip.w {
                break;
            }
            for (row, bits) in glyph.iter().enumerate() {
                for col in 0..8 {
                    if bits >> col & 1 == 1 {
                        let px = Rect::new(gx + col * scale, y + row as i32 * scale, scale, scale);
                        self.fill(px, clip, rgb);
                    }
                }
            }
        }
    }

    fn scale_brightness(&mut self, percent: u8) {
        let b = percent.min(100) as u32;
        for px in self.data.chunks_exact_mut(4) {
            for c in &mut px[..3] {
                *c = ((*c as u32 * b + 50) / 100) as u8;
            }
        }
    }
}

/// Human-readable form of a widget value.
pub(crate) fn value_text(v: &Value) -> String {
    match v {
        Value::Null => String::from("-"),
        Value::Bool(true) => String::from("ON"),
        Value::Bool(false) => String::from("OFF"),
        other => format!("{other}"),
    }
}

fn text_in(buf: &mut PixelBuffer, r: Rect, s: &str, centered: bool, rgb: Rgb) {
    let len = s.chars().count() as i32;
    let scale = if len * 16 <= r.w - 16 && r.h >= 24 { 2 } else { 1 };
    let tw = len * 8 * scale;
    let x = if centered { r.x + ((r.w - tw) / 2).max(4) } else { r.x + 8 };
    let y = r.y + (r.h - 8 * scale) / 2;
    buf.text(x, y, s, scale, r, rgb);
}

fn draw(buf: &mut PixelBuffer, n: &UiNode) {
    let r = n.bounds;
    let labelled = |n: &UiNode| match &n.value {
        Some(v) => format!("{}: {}", n.label, value_text(v)),
        None => n.label.clone(),
    };
    match n.role {
        Role::Screen => {}
        Role::Label if n.id == "header" => {
            buf.fill(r, r, HEADER_BG);
            text_in(buf, r, &n.label, false, TEXT);
        }
        Role::Label => text_in(buf, r, &labelled(n), false, TEXT),
        Role::Button => {
            let active = matches!(n.value, Some(Value::Bool(true)));
            buf.fill(r, r, if active { NAV_ACTIVE } else { BUTTON });
            buf.border(r, BORDER);
            text_in(buf, r, &n.label, true, TEXT);
        }
        Role::Toggle => {
            let on = matches!(n.value, Some(Value::Bool(true)));
            buf.fill(r, r, if on { TOGGLE_ON } else { TOGGLE_OFF });
            buf.border(r, BORDER);
            text_in(buf, r, &labelled(n), true, TEXT);
        }
        Role::Slider => {
            buf.fill(r, r, TRACK);
            let frac = n
                .binding
                .as_deref()
                .and_then(crate::vehicle::signal::spec)
                .and_then(|s| s.ty.range())
                .zip(n.value.as_ref().and_then(Value::as_f64))
                .map(|((lo, hi), v)| (v - lo) / (hi - lo))
                .unwrap_or(0.0);
            let fw = libm::round(frac.clamp(0.0, 1.0) * r.w as f64) as i32;
            buf.fill(Rect::new(r.x, r.y, fw, r.h), r, FILL);
            buf.border(r, BORDER);
            text_in(buf, r, &labelled(n), true, TEXT);
        }
        Role::TextField => {
            buf.fill(r, r, FIELD);
            buf.border(r, BORDER);
            let shown = match &n.value {
                Some(Value::Text(t)) if !t.is_empty() => t.clone(),
                _ => n.label.clone(),
            };
            text_in(buf, r, &shown, false, DARK_TEXT);
        }
        Role::List => {
            buf.fill(r, r, LIST);
            buf.border(r, BORDER);
        }
    }
    for c in &n.children {
        draw(buf, c);
    }
}

/// Rasterizes the tree, then scales RGB by the display brightness.
pub fn render(tree: &UiTree) -> PixelBuffer {
    let mut buf = PixelBuffer::new(tree.width, tree.height, BG);
    draw(&mut buf, &tree.root);
    buf.scale_brightness(tree.brightness);
    buf
}
