use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Behavior, Role, ScreenId, UiNode, UiTree};
use crate::vehicle::signal;
use crate::vehicle::{ControlCommand, Value};

/// What a gesture resolves to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum GuiEffect {
    Command { command: ControlCommand },
    NavigateTo { screen: ScreenId },
    /// Show page `page` of list `list`.
    Scroll { list: String, page: u32 },
    NoOp,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GestureError {
    #[error("point ({x}, {y}) is outside the screen")]
    OutOfBounds { x: i32, y: i32 },
    #[error("no element with index {0}")]
    UnknownIndex(u32),
    #[error("element {0} is not a text field")]
    NotATextField(u32),
}

fn in_screen(tree: &UiTree, x: i32, y: i32) -> Result<(), GestureError> {
    if x < 0 || y < 0 || x >= tree.width as i32 || y >= tree.height as i32 {
        return Err(GestureError::OutOfBounds { x, y });
    }
    Ok(())
}

/// Deepest interactable node containing the point; ties go to the latest in
/// pre-order.
pub fn hit_test(tree: &UiTree, x: i32, y: i32) -> Option<&UiNode> {
    let mut best: Option<(&UiNode, usize)> = None;
    tree.root.walk(&mut |n, depth| {
        if n.interactable && n.bounds.contains(x, y) && best.map_or(true, |(_, d)| depth >= d) {
            best = Some((n, depth));
        }
    });
    best.map(|(n, _)| n)
}

fn slider_value(node: &UiNode, v: f64) -> Option<Value> {
    let spec = signal::spec(node.binding.as_deref()?)?;
    let (lo, hi) = spec.ty.range()?;
    let v = v.clamp(lo, hi);
    match spec.ty {
        signal::SignalType::Int { .. } => spec.ty.coerce(&Value::Int(libm::round(v) as i64)),
        _ => spec.ty.coerce(&Value::Float(v)),
    }
}

/// Effect of tapping `node` at horizontal position `x`.
pub fn node_effect(node: &UiNode, x: i32) -> GuiEffect {
    let cmd = |command| GuiEffect::Command { command };
    match &node.behavior {
        Some(Behavior::Toggle { target }) => cmd(ControlCommand::toggle(target)),
        Some(Behavior::Step { target, amount }) => cmd(ControlCommand::step(target, amount.clone())),
        Some(Behavior::Set { target, value }) => cmd(ControlCommand::set(target, value.clone())),
        Some(Behavior::Navigate { screen }) => GuiEffect::NavigateTo { screen: *screen },
        Some(Behavior::Slide { target }) => {
            let Some((lo, hi)) = signal::spec(target).and_then(|s| s.ty.range()) else {
                return GuiEffect::NoOp;
            };
            let frac = (x - node.bounds.x) as f64 / (node.bounds.w - 1).max(1) as f64;
            match slider_value(node, lo + frac * (hi - lo)) {
                Some(v) => cmd(ControlCommand::set(target, v)),
                None => GuiEffect::NoOp,
            }
        }
        _ => GuiEffect::NoOp,
    }
}

pub fn dispatch_tap(tree: &UiTree, x: i32, y: i32) -> Result<GuiEffect, GestureError> {
    in_screen(tree, x, y)?;
    Ok(hit_test(tree, x, y).map_or(GuiEffect::NoOp, |n| node_effect(n, x)))
}

/// Horizontal swipes on a slider move its value by the displacement as a
/// fraction of the slider width; other swipes starting inside a list scroll
/// it one page (upward or leftward swipes advance).
pub fn dispatch_swipe(tree: &UiTree, from: (i32, i32), to: (i32, i32)) -> Result<GuiEffect, GestureError> {
    in_screen(tree, from.0, from.1)?;
    in_screen(tree, to.0, to.1)?;
    if from == to {
        return dispatch_tap(tree, from.0, from.1);
    }
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    if let Some(n) = hit_test(tree, from.0, from.1) {
        if let (Role::Slider, Some(Behavior::Slide { target })) = (n.role, &n.behavior) {
            if dx.abs() >= dy.abs() {
                let cur = n.value.as_ref().and_then(Value::as_f64);
                let range = signal::spec(target).and_then(|s| s.ty.range());
                if let (Some(cur), Some((lo, hi))) = (cur, range) {
                    let delta = dx as f64 / (n.bounds.w - 1).max(1) as f64 * (hi - lo);
                    if let Some(v) = slider_value(n, cur + delta) {
                        return Ok(GuiEffect::Command { command: ControlCommand::set(target, v) });
                    }
                }
                return Ok(GuiEffect::NoOp);
            }
        }
    }
    let mut list: Option<&UiNode> = None;
    tree.root.walk(&mut |n, _| {
        if matches!(n.behavior, Some(Behavior::Scroll { .. })) && n.bounds.contains(from.0, from.1) {
            list = Some(n);
        }
    });
    if let Some(l) = list {
        if let Some(Behavior::Scroll { page, pages }) = l.behavior {
            let forward = if dy != 0 { dy < 0 } else { dx < 0 };
            let next = if forward { (page + 1).min(pages.saturating_sub(1)) } else { page.saturating_sub(1) };
            return Ok(GuiEffect::Scroll { list: l.id.clone(), page: next });
        }
    }
    Ok(GuiEffect::NoOp)
}

pub fn dispatch_text(tree: &UiTree, som_index: u32, text: &str) -> Result<GuiEffect, GestureError> {
    let node = tree.by_som_index(som_index).ok_or(GestureError::UnknownIndex(som_index))?;
    match &node.behavior {
        Some(Behavior::TextEntry { target }) if node.role == Role::TextField => Ok(GuiEffect::Command {
            command: ControlCommand::set(target, Value::Text(text.to_string())),
        }),
        _ => Err(GestureError::NotATextField(som_index)),
    }
}
