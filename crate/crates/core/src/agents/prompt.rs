use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{GeoContext, MemoryStore, Variant};
use crate::episode::Observation;
use crate::gui::{UiNode, UiTree};

pub const SECTION_INSTRUCTION: &str = "### INSTRUCTION";
pub const SECTION_UI: &str = "### UI TREE";
pub const SECTION_SCREEN: &str = "### SCREEN";
pub const SECTION_GPS: &str = "### GPS";
pub const SECTION_CONTEXT: &str = "### GEO CONTEXT";
pub const SECTION_MEMORY: &str = "### MEMORY";
pub const SECTION_RESPONSE: &str = "### RESPONSE";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptProfile {
    pub id: String,
    pub preamble: String,
    pub response_format: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptProfiles {
    pub profiles: Vec<PromptProfile>,
}

impl PromptProfiles {
    pub fn get(&self, id: &str) -> Option<&PromptProfile> {
        self.profiles.iter().find(|p| p.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("{variant:?} may not receive {what}")]
    ModalityViolation { variant: Variant, what: &'static str },
}

const ACTION_TYPES: &str = "Action types: tap {index} | tap {x, y} | swipe {from: [x, y], to: [x, y]} | \
input_text {index, text} | api_call {name: open_safety_center | raise_safety_alert, args} | \
status {value: complete | infeasible} | wait";

fn node_line(out: &mut String, n: &UiNode, depth: usize) {
    let indent = "  ".repeat(depth);
    let tag = match n.som_index {
        Some(i) => format!("[{i}]"),
        None => String::from("-"),
    };
    let _ = write!(out, "{indent}{tag} {:?} \"{}\" ({})", n.role, n.label, n.id);
    if let Some(v) = &n.value {
        let _ = write!(out, " = {v}");
    }
    let b = n.bounds;
    let _ = writeln!(out, " @{},{},{},{}", b.x, b.y, b.w, b.h);
}

/// Indented a11y serialization with SoM indices on interactables.
pub fn serialize_tree(tree: &UiTree) -> String {
    let mut out = String::new();
    tree.root.walk(&mut |n, d| node_line(&mut out, n, d));
    out
}

fn check_modalities(variant: Variant, obs: &Observation, context: Option<&GeoContext>) -> Result<(), PromptError> {
    let deny = |what| Err(PromptError::ModalityViolation { variant, what });
    if obs.a11y.is_none() {
        return deny("a missing a11y tree");
    }
    let has_screen = obs.screen.is_some() || obs.som_screen.is_some();
    match variant {
        Variant::T3A if has_screen => deny("screen"),
        Variant::T3A | Variant::M3A if obs.gps.is_some() => deny("gps"),
        Variant::T3A | Variant::M3A if context.is_some() => deny("geo context"),
        Variant::M3A if !has_screen => deny("a missing screen"),
        Variant::ASURADA if !has_screen || obs.gps.is_none() => deny("a missing screen or gps"),
        _ => Ok(()),
    }
}

/// Assembles the prompt text. Section order is fixed; sections a variant
/// may not see are never emitted.
pub fn build_prompt(
    variant: Variant,
    profile: &PromptProfile,
    obs: &Observation,
    context: Option<&GeoContext>,
    memory: &MemoryStore,
    instruction: &str,
) -> Result<String, PromptError> {
    check_modalities(variant, obs, context)?;
    let mut p = String::new();
    let _ = writeln!(p, "{}\n", profile.preamble);
    let _ = writeln!(p, "{SECTION_INSTRUCTION}\n{instruction}\n");
    let _ = writeln!(p, "{SECTION_UI}\nscreen: {}", obs.current_screen.name());
    if let Some(tree) = &obs.a11y {
        p.push_str(&serialize_tree(tree));
    }
    p.push('\n');
    if !obs.signals.is_empty() {
        p.push_str("signals:\n");
        for (k, v) in &obs.signals {
            let _ = writeln!(p, "  {k}: {v}");
        }
        p.push('\n');
    }
    if variant != Variant::T3A {
        let _ = writeln!(p, "{SECTION_SCREEN}\nThe attached image shows the current screen with numbered marks matching the [index] values above.\n");
    }
    if variant == Variant::ASURADA {
        if let Some(f) = &obs.gps {
            let _ = writeln!(
                p,
                "{SECTION_GPS}\nlat: {:.6}\nlon: {:.6}\nheading_deg: {:.1}\nquality: {:?}\n",
                f.lat, f.lon, f.heading_deg, f.quality
            );
        }
        if let Some(c) = context {
            let _ = writeln!(p, "{SECTION_CONTEXT}\nregion: {}", c.region_id);
            if c.estimated {
                p.push_str("position: estimated (dead reckoning)\n");
            }
            for r in &c.reports {
                let _ = writeln!(p, "{}:", r.kind.name());
                for f in &r.facts {
                    let _ = writeln!(p, "  {}: {}", f.key, f.value);
                }
                if !r.violations.is_empty() {
                    let _ = writeln!(p, "  violations: {}", r.violations.join(", "));
                }
            }
            p.push('\n');
        }
    }
    let _ = writeln!(p, "{SECTION_MEMORY}");
    if memory.is_empty() {
        p.push_str("(none)\n");
    }
    for e in memory.entries() {
        let _ = writeln!(p, "{}", e.summary);
    }
    let _ = writeln!(p, "\n{SECTION_RESPONSE}\n{}\n{ACTION_TYPES}", profile.response_format);
    Ok(p)
}
