//! Deterministic scripted policies. The oracle sees the instance validator
//! and plans the shortest GUI path to satisfy it, reading progress only from
//! the observation. The geo-blind variant behaves the same but has no
//! region knowledge.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::{ActionPlan, GeoContext};
use crate::episode::{Action, Observation, StatusKind, TapTarget};
use crate::gui::{node_effect, Behavior, GuiEffect, Layouts, Role, ScreenId, UiNode, UiTree};
use crate::predicate::{Comparator, Condition};
use crate::task::{Category, TaskInstance};
use crate::vehicle::Value;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("no widget on {screen} moves `{signal}` toward its target")]
pub struct OracleStuck {
    pub signal: String,
    pub screen: String,
}

const SAFETY_SIGNAL: &str = "safety.notification_center_open";

fn observed(obs: &Observation, signal: &str) -> Option<Value> {
    obs.a11y
        .as_ref()
        .and_then(|t| t.displayed_value(signal).cloned())
        .or_else(|| obs.signals.get(signal).cloned())
}

fn targets(w: &crate::gui::layout::WidgetSpec, signal: &str) -> bool {
    w.behavior().as_ref().and_then(Behavior::target) == Some(signal) || w.items.iter().any(|i| targets(i, signal))
}

/// Screen whose widgets can change `signal`, else the first that shows it.
fn home_screen(layouts: &Layouts, signal: &str) -> Option<ScreenId> {
    layouts
        .screens
        .iter()
        .find(|s| s.widgets.iter().any(|w| targets(w, signal)))
        .or_else(|| {
            layouts.screens.iter().find(|s| {
                s.binding.as_deref() == Some(signal) || s.widgets.iter().any(|w| w.binding.as_deref() == Some(signal))
            })
        })
        .map(|s| s.screen)
}

fn tap(n: &UiNode) -> Action {
    Action::tap_index(n.som_index.expect("interactables carry an index"))
}

fn nav_button(tree: &UiTree, to: ScreenId) -> Option<&UiNode> {
    tree.interactables().into_iter().find(|n| n.behavior == Some(Behavior::Navigate { screen: to }))
}

/// Value a tap on `n` at `x` would set.
fn predicted(n: &UiNode, x: i32) -> Option<Value> {
    match node_effect(n, x) {
        GuiEffect::Command { command } => command.value,
        _ => None,
    }
}

fn slider_x(n: &UiNode, target: f64) -> Option<i32> {
    let spec = crate::vehicle::signal::spec(n.binding.as_deref()?)?;
    let (lo, hi) = spec.ty.range()?;
    if !(lo..=hi).contains(&target) || hi <= lo {
        return None;
    }
    let frac = (target - lo) / (hi - lo);
    Some(n.bounds.x + libm::round(frac * (n.bounds.w - 1) as f64) as i32)
}

/// One action on the current screen that moves `c` toward holding.
fn operate(tree: &UiTree, c: &Condition, current: &Value) -> Option<(Action, String)> {
    let controls: Vec<&UiNode> = tree
        .interactables()
        .into_iter()
        .filter(|n| n.behavior.as_ref().and_then(Behavior::target) == Some(c.signal.as_str()))
        .collect();
    for n in &controls {
        if let Some(Behavior::Set { value, .. }) = &n.behavior {
            if c.op.holds(value, &c.value) {
                return Some((tap(n), format!("tapping [{}] \"{}\" sets {value}", n.som_index?, n.label)));
            }
        }
    }
    for n in &controls {
        match &n.behavior {
            Some(Behavior::Toggle { .. }) if c.op.holds(&Value::Bool(current.as_bool() != Some(true)), &c.value) => {
                return Some((tap(n), format!("toggling [{}] \"{}\"", n.som_index?, n.label)));
            }
            Some(Behavior::Slide { .. }) => {
                let target = c.value.as_f64()?;
                let x = slider_x(n, target)?;
                if predicted(n, x).is_some_and(|v| c.op.holds(&v, &c.value)) {
                    let (_, y) = n.bounds.center();
                    return Some((
                        Action::Tap { target: TapTarget::Point { x, y } },
                        format!("tapping slider [{}] at x={x} for {}", n.som_index?, c.value),
                    ));
                }
            }
            Some(Behavior::TextEntry { .. }) if matches!(c.op, Comparator::Eq) => {
                if let Some(text) = c.value.as_text() {
                    return Some((
                        Action::InputText { som_index: n.som_index?, text: text.to_string() },
                        format!("typing \"{text}\" into [{}]", n.som_index?),
                    ));
                }
            }
            _ => {}
        }
    }
    let (cur, goal) = (current.as_f64()?, c.value.as_f64());
    let up = match (c.op, goal) {
        (Comparator::Ge | Comparator::Gt, _) => true,
        (Comparator::Le | Comparator::Lt, _) => false,
        (_, Some(g)) => cur < g,
        _ => return None,
    };
    controls.iter().find_map(|n| match &n.behavior {
        Some(Behavior::Step { amount, .. }) if amount.as_f64().is_some_and(|a| (a > 0.0) == up) => {
            Some((tap(n), format!("stepping with [{}] \"{}\"", n.som_index?, n.label)))
        }
        _ => None,
    })
}

/// Swipe that pages a list forward, when a set-button for `c` may be on a
/// later page.
fn page_forward(tree: &UiTree) -> Option<Action> {
    tree.nodes().into_iter().find_map(|n| match n.behavior {
        Some(Behavior::Scroll { page, pages }) if n.role == Role::List && page + 1 < pages => {
            let (cx, _) = n.bounds.center();
            Some(Action::Swipe { from: [cx, n.bounds.y + n.bounds.h - 20], to: [cx, n.bounds.y + 20] })
        }
        _ => None,
    })
}

fn context_note(context: Option<&GeoContext>) -> String {
    let Some(c) = context else { return String::new() };
    let mut facts = Vec::new();
    for r in &c.reports {
        for f in &r.facts {
            facts.push(format!("{} {}", f.key, f.value));
        }
    }
    let mut note = format!("Region {}{}: {}.", c.region_id, if c.estimated { " (estimated position)" } else { "" }, facts.join(", "));
    let v: Vec<&str> = c.violations().collect();
    if !v.is_empty() {
        note.push_str(&format!(" Violations: {}.", v.join(", ")));
    }
    note.push(' ');
    note
}

fn plan(reasoning: String, action: Action) -> ActionPlan {
    ActionPlan { reasoning, action, confidence: Some(1.0) }
}

enum Geo<'a> {
    Known(Option<&'a GeoContext>),
    Blind,
}

fn policy(obs: &Observation, inst: &TaskInstance, layouts: &Layouts, geo: Geo<'_>) -> Result<ActionPlan, OracleStuck> {
    let note = match geo {
        Geo::Known(c) => context_note(c),
        Geo::Blind => String::new(),
    };
    let pending = inst
        .validator
        .conditions
        .iter()
        .find(|c| !observed(obs, &c.signal).is_some_and(|v| c.op.holds(&v, &c.value)));
    let Some(c) = pending else {
        let held: Vec<String> =
            inst.validator.conditions.iter().map(|c| format!("{} {} {}", c.signal, c.op.symbol(), c.value)).collect();
        return Ok(plan(format!("{note}Goal reached: {}.", held.join(", ")), Action::status(StatusKind::Complete)));
    };
    if inst.geo_dependent {
        let violation = match geo {
            Geo::Known(Some(ctx)) => ctx.has_violations(),
            _ => false,
        };
        if !violation {
            return Ok(plan(
                format!("{note}Nothing observed calls for a change, so the request cannot be acted on."),
                Action::status(StatusKind::Infeasible),
            ));
        }
    }
    if c.signal == SAFETY_SIGNAL && inst.category == Category::DrivingAlignment && c.value == Value::Bool(true) {
        return Ok(plan(
            format!("{note}Alerting the driver through the safety center."),
            Action::api("open_safety_center"),
        ));
    }
    let tree = obs.a11y.as_ref().ok_or_else(|| OracleStuck {
        signal: c.signal.clone(),
        screen: String::from("(no a11y tree)"),
    })?;
    let here = obs.current_screen;
    let stuck = || OracleStuck { signal: c.signal.clone(), screen: here.name().to_string() };
    let home = home_screen(layouts, &c.signal);
    if let Some(cur) = observed(obs, &c.signal) {
        if let Some((action, why)) = operate(tree, c, &cur) {
            return Ok(plan(
                format!("{note}{} is {cur}, needs {} {}; {why}.", c.signal, c.op.symbol(), c.value),
                action,
            ));
        }
        if home == Some(here) {
            if let Some(swipe) = page_forward(tree) {
                return Ok(plan(format!("{note}Looking further down the list for {}.", c.value), swipe));
            }
            return Err(stuck());
        }
    }
    let to = home.filter(|s| *s != here).ok_or_else(stuck)?;
    let button = nav_button(tree, to).ok_or_else(stuck)?;
    Ok(plan(format!("{note}{} is controlled on the {} screen; opening it.", c.signal, to.name()), tap(button)))
}

/// White-box oracle. With a geo context, location-dependent tasks are acted
/// on when the context reports a violation.
pub fn scripted_oracle_policy(
    obs: &Observation,
    inst: &TaskInstance,
    layouts: &Layouts,
    context: Option<&GeoContext>,
) -> Result<ActionPlan, OracleStuck> {
    policy(obs, inst, layouts, Geo::Known(context))
}

/// The oracle without region knowledge: location-dependent tasks end in
/// `Status Infeasible`.
pub fn geo_blind_policy(obs: &Observation, inst: &TaskInstance, layouts: &Layouts) -> Result<ActionPlan, OracleStuck> {
    policy(obs, inst, layouts, Geo::Blind)
}
