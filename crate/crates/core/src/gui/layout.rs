//! Authored per-screen widget layouts.
//!
//! File form (JSON):
//!
//! ```json
//! { "layout_version": 1,
//!   "screens": [ { "screen": "HVAC", "title": "Climate", "widgets": [
//!       { "id": "hvac.fan_plus", "role": "Button", "label": "Fan +",
//!         "bounds": [360, 230, 80, 60], "binding": "hvac.fan_speed", "step": 1 } ] } ] }
//! ```
//!
//! Interactable widgets derive their behavior from role and binding:
//! `Toggle` toggles, `Slider` slides, `TextField` takes text, a `Button` with
//! `step` increments or decrements, a `Button` with `set` writes a literal.
//! A `List` either holds static `items` or mirrors the alert list
//! (`"source": "alerts"`), paginated by `page_size`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Behavior, Rect, Role, ScreenId, SCREEN_WIDTH};
use crate::vehicle::signal::{self, SignalType};
use crate::vehicle::{apply_control, ControlCommand, Value, VehicleState};

pub const HEADER: Rect = Rect::new(0, 0, SCREEN_WIDTH as i32, 80);
pub const CONTENT: Rect = Rect::new(0, 80, SCREEN_WIDTH as i32, 560);
pub const NAV_BAR: Rect = Rect::new(0, 640, SCREEN_WIDTH as i32, 80);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ListSource {
    Alerts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidgetSpec {
    pub id: String,
    pub role: Role,
    pub label: String,
    pub bounds: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Value>,
    /// Literal written by a set-button; an explicit `null` clears the signal.
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub set: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<WidgetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ListSource>,
}

fn present<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Value>, D::Error> {
    Value::deserialize(d).map(Some)
}

impl WidgetSpec {
    /// Interaction behavior implied by role, binding, `step` and `set`.
    pub fn behavior(&self) -> Option<Behavior> {
        let target = self.binding.clone();
        match self.role {
            Role::Toggle => Some(Behavior::Toggle { target: target? }),
            Role::Slider => Some(Behavior::Slide { target: target? }),
            Role::TextField => Some(Behavior::TextEntry { target: target? }),
            Role::Button => match (&self.step, &self.set) {
                (Some(amount), None) => Some(Behavior::Step { target: target?, amount: amount.clone() }),
                (None, Some(value)) => Some(Behavior::Set { target: target?, value: value.clone() }),
                _ => None,
            },
            _ => None,
        }
    }

    /// The command a tap would issue, for widgets whose effect is fixed.
    pub fn fixed_command(&self) -> Option<ControlCommand> {
        match self.behavior()? {
            Behavior::Toggle { target } => Some(ControlCommand::toggle(&target)),
            Behavior::Step { target, amount } => Some(ControlCommand::step(&target, amount)),
            Behavior::Set { target, value } => Some(ControlCommand::set(&target, value)),
            _ => None,
        }
    }

    /// Row rectangles of list items on one page.
    pub fn item_slot(&self, row: u32) -> Rect {
        let per_page = self.page_size.unwrap_or(1).max(1) as i32;
        let row_h = self.bounds.h / per_page;
        Rect::new(self.bounds.x + 10, self.bounds.y + row as i32 * row_h + 5, self.bounds.w - 20, row_h - 10)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenLayout {
    pub screen: ScreenId,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binding: Option<String>,
    pub widgets: Vec<WidgetSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layouts {
    pub layout_version: u32,
    pub screens: Vec<ScreenLayout>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum LayoutError {
    #[error("layout parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("screen {0} is missing or defined twice")]
    ScreenCount(ScreenId),
    #[error("widget `{id}`: {problem}")]
    Widget { id: String, problem: String },
}

fn widget_err(id: &str, problem: impl Into<String>) -> LayoutError {
    LayoutError::Widget { id: id.into(), problem: problem.into() }
}

impl Layouts {
    pub fn from_json(text: &str) -> Result<Self, LayoutError> {
        let layouts: Layouts = serde_json::from_str(text).map_err(|e| LayoutError::Parse {
            line: e.line(),
            column: e.column(),
            msg: format!("{e}"),
        })?;
        layouts.validate()?;
        Ok(layouts)
    }

    pub fn screen(&self, id: ScreenId) -> Option<&ScreenLayout> {
        self.screens.iter().find(|s| s.screen == id)
    }

    /// Every widget of a screen, list items included, in declaration order.
    pub fn widgets(&self, id: ScreenId) -> Vec<&WidgetSpec> {
        let mut out = Vec::new();
        if let Some(s) = self.screen(id) {
            for w in &s.widgets {
                out.push(w);
                out.extend(w.items.iter());
            }
        }
        out
    }

    /// Checks structure, bindings and geometry.
    pub fn validate(&self) -> Result<(), LayoutError> {
        for id in ScreenId::ALL {
            if self.screens.iter().filter(|s| s.screen == id).count() != 1 {
                return Err(LayoutError::ScreenCount(id));
            }
        }
        let mut ids = BTreeSet::new();
        for screen in &self.screens {
            if let Some(b) = &screen.binding {
                if signal::spec(b).is_none() {
                    return Err(widget_err(screen.screen.name(), "unknown screen binding"));
                }
            }
            let mut centers: Vec<(&str, Rect)> = Vec::new();
            for w in &screen.widgets {
                check_widget(w, &CONTENT)?;
                if !ids.insert(w.id.clone()) {
                    return Err(widget_err(&w.id, "duplicate id"));
                }
                if w.role == Role::List {
                    if w.page_size.unwrap_or(0) == 0 {
                        return Err(widget_err(&w.id, "list needs a positive page_size"));
                    }
                    if w.items.is_empty() == w.source.is_none() {
                        return Err(widget_err(&w.id, "list needs exactly one of items or source"));
                    }
                    for (i, item) in w.items.iter().enumerate() {
                        if item.bounds != w.item_slot(i as u32 % w.page_size.unwrap_or(1)) {
                            return Err(widget_err(&item.id, "list item bounds must match its row slot"));
                        }
                        check_widget(item, &w.bounds)?;
                        if !ids.insert(item.id.clone()) {
                            return Err(widget_err(&item.id, "duplicate id"));
                        }
                    }
                } else if w.role.is_interactable() {
                    centers.push((&w.id, w.bounds));
                }
            }
            // Top-level interactables must not overlap, so each center hits its own widget.
            for (i, (a, ra)) in centers.iter().enumerate() {
                for (b, rb) in centers.iter().skip(i + 1) {
                    if overlaps(ra, rb) {
                        return Err(widget_err(a, format!("overlaps `{b}`")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h
}

fn check_widget(w: &WidgetSpec, parent: &Rect) -> Result<(), LayoutError> {
    if w.bounds.w <= 0 || w.bounds.h <= 0 || !parent.contains_rect(&w.bounds) {
        return Err(widget_err(&w.id, "bounds must be non-empty and inside the parent"));
    }
    let binding = match &w.binding {
        Some(b) => Some(signal::spec(b).ok_or_else(|| widget_err(&w.id, format!("unknown signal `{b}`")))?),
        None => None,
    };
    if !w.role.is_interactable() {
        return Ok(());
    }
    let spec = binding.ok_or_else(|| widget_err(&w.id, "interactable widget needs a binding"))?;
    if !spec.writable {
        return Err(widget_err(&w.id, format!("`{}` is read-only", spec.path)));
    }
    let type_ok = match w.role {
        Role::Toggle => spec.ty == SignalType::Bool,
        Role::Slider => spec.ty.is_numeric(),
        Role::TextField => matches!(spec.ty, SignalType::Text | SignalType::OptText),
        Role::Button => w.behavior().is_some(),
        _ => true,
    };
    if !type_ok {
        return Err(widget_err(&w.id, "role does not fit the bound signal"));
    }
    if let Some(cmd) = w.fixed_command() {
        apply_control(&VehicleState::default(), &cmd)
            .map_err(|e| widget_err(&w.id, format!("command rejected: {e}")))?;
    }
    Ok(())
}
