//! Synthetic cockpit GUI: accessibility tree, rasterized screen with
//! Set-of-Mark tags, and gesture dispatch back to control commands.

mod build;
mod dispatch;
pub mod layout;
mod render;
mod som;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::vehicle::Value;

pub use build::{build_ui_tree, build_ui_tree_paged};
pub use dispatch::{dispatch_swipe, dispatch_tap, dispatch_text, hit_test, node_effect, GestureError, GuiEffect};
pub use layout::{LayoutError, Layouts};
pub use render::{render, PixelBuffer};
pub use som::{annotate_som, SomMap};

pub const SCREEN_WIDTH: u32 = 1280;
pub const SCREEN_HEIGHT: u32 = 720;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScreenId {
    Home,
    HVAC,
    Media,
    Maps,
    Comms,
    System,
    Apps,
    SafetyCenter,
}

impl ScreenId {
    pub const ALL: [ScreenId; 8] = [
        ScreenId::Home,
        ScreenId::HVAC,
        ScreenId::Media,
        ScreenId::Maps,
        ScreenId::Comms,
        ScreenId::System,
        ScreenId::Apps,
        ScreenId::SafetyCenter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScreenId::Home => "Home",
            ScreenId::HVAC => "HVAC",
            ScreenId::Media => "Media",
            ScreenId::Maps => "Maps",
            ScreenId::Comms => "Comms",
            ScreenId::System => "System",
            ScreenId::Apps => "Apps",
            ScreenId::SafetyCenter => "SafetyCenter",
        }
    }

    /// Label of the navigation-bar button leading here.
    pub fn nav_label(self) -> &'static str {
        match self {
            ScreenId::SafetyCenter => "Safety",
            other => other.name(),
        }
    }
}

impl fmt::Display for ScreenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScreenId {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        ScreenId::ALL.into_iter().find(|id| id.name() == s).ok_or(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Button,
    Toggle,
    Slider,
    Label,
    List,
    Screen,
    TextField,
}

impl Role {
    pub fn is_interactable(self) -> bool {
        matches!(self, Role::Button | Role::Toggle | Role::Slider | Role::TextField)
    }
}

/// Pixel rectangle; `x..x+w` and `y..y+h` are half-open.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl From<[i32; 4]> for Rect {
    fn from(a: [i32; 4]) -> Self {
        Rect { x: a[0], y: a[1], w: a[2], h: a[3] }
    }
}

impl From<Rect> for [i32; 4] {
    fn from(r: Rect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn contains(&self, px: i32, py: i32) -> bool {
        px >= self.x && py >= self.y && px < self.x + self.w && py < self.y + self.h
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.x >= self.x && o.y >= self.y && o.x + o.w <= self.x + self.w && o.y + o.h <= self.y + self.h
    }

    pub fn center(&self) -> (i32, i32) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }
}

/// What interacting with a node does.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Behavior {
    Toggle { target: String },
    Step { target: String, amount: Value },
    Set { target: String, value: Value },
    Slide { target: String },
    TextEntry { target: String },
    Navigate { screen: ScreenId },
    /// Carried by List nodes; `page` is zero-based.
    Scroll { page: u32, pages: u32 },
}

impl Behavior {
    pub fn target(&self) -> Option<&str> {
        match self {
            Behavior::Toggle { target }
            | Behavior::Step { target, .. }
            | Behavior::Set { target, .. }
            | Behavior::Slide { target }
            | Behavior::TextEntry { target } => Some(target),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UiNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub som_index: Option<u32>,
    pub id: String,
    pub role: Role,
    pub label: String,
    pub bounds: Rect,
    /// A bound optional signal that is unset shows as `Some(Value::Null)`.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present_value")]
    pub value: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<String>,
    pub interactable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<Behavior>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<UiNode>,
}

/// Keeps an explicit `null` distinct from an absent value.
fn present_value<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

impl UiNode {
    /// Pre-order traversal with depth.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a UiNode, usize)) {
        fn go<'a>(n: &'a UiNode, depth: usize, f: &mut impl FnMut(&'a UiNode, usize)) {
            f(n, depth);
            for c in &n.children {
                go(c, depth + 1, f);
            }
        }
        go(self, 0, f);
    }
}

/// Accessibility tree of one screen, plus what the rasterizer needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UiTree {
    pub screen: ScreenId,
    pub width: u32,
    pub height: u32,
    /// Display brightness percent, applied by the rasterizer.
    pub brightness: u8,
    pub root: UiNode,
}

impl UiTree {
    pub fn nodes(&self) -> Vec<&UiNode> {
        let mut out = Vec::new();
        self.root.walk(&mut |n, _| out.push(n));
        out
    }

    pub fn interactables(&self) -> Vec<&UiNode> {
        self.nodes().into_iter().filter(|n| n.interactable).collect()
    }

    pub fn by_som_index(&self, index: u32) -> Option<&UiNode> {
        self.nodes().into_iter().find(|n| n.som_index == Some(index))
    }

    pub fn by_id(&self, id: &str) -> Option<&UiNode> {
        self.nodes().into_iter().find(|n| n.id == id)
    }

    /// First node bound to `path` that displays a value.
    pub fn displayed_value(&self, path: &str) -> Option<&Value> {
        self.nodes()
            .into_iter()
            .filter(|n| n.binding.as_deref() == Some(path))
            .find_map(|n| n.value.as_ref())
    }

    /// Canonical JSON used for observation digests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}
