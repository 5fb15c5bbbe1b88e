//! Parameterized task templates, seeded instantiation, initialization and
//! state-based validation.
//!
//! A template file is a JSON array of templates:
//!
//! ```json
//! [{ "template_id": "ec_set_temperature",
//!    "category": "ExplicitControl", "functional_area": "HVAC",
//!    "instruction_template": "Set the temperature to {t} degrees.",
//!    "slots": [{"name": "t", "domain": {"min": 17, "max": 30, "step": 0.5}}],
//!    "init_overrides": {"hvac.setpoint_c": 16},
//!    "validator": {"check": "check_temperature_setpoint", "args": {"t": {"slot": "t"}}},
//!    "max_steps": 15 }]
//! ```
//!
//! A validator is either a named catalog check or a conjunction
//! `{"all": [{"signal": ..., "op": "==" | "!=" | ">=" | "<=", "value": ...}]}`.
//! Anywhere a literal is expected, `{"slot": name}` refers to a bound slot.

pub mod catalog;
mod instance;
mod suite;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicate::Comparator;
use crate::vehicle::{signal, Value};

pub use instance::{initialize_episode, instantiate, validate, BoundValidator, EpisodeStart, TaskInstance};
pub use suite::{Suite, SuiteManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    ExplicitControl,
    ImplicitIntent,
    DrivingAlignment,
    EnvironmentAlerts,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::ExplicitControl, Category::ImplicitIntent, Category::DrivingAlignment, Category::EnvironmentAlerts];

    pub fn name(self) -> &'static str {
        match self {
            Category::ExplicitControl => "ExplicitControl",
            Category::ImplicitIntent => "ImplicitIntent",
            Category::DrivingAlignment => "DrivingAlignment",
            Category::EnvironmentAlerts => "EnvironmentAlerts",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionalArea {
    Maps,
    HVAC,
    Road,
    Phenomenon,
    Media,
    Apps,
    System,
    Comms,
}

impl FunctionalArea {
    pub const ALL: [FunctionalArea; 8] = [
        FunctionalArea::Maps,
        FunctionalArea::HVAC,
        FunctionalArea::Road,
        FunctionalArea::Phenomenon,
        FunctionalArea::Media,
        FunctionalArea::Apps,
        FunctionalArea::System,
        FunctionalArea::Comms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionalArea::Maps => "Maps",
            FunctionalArea::HVAC => "HVAC",
            FunctionalArea::Road => "Road",
            FunctionalArea::Phenomenon => "Phenomenon",
            FunctionalArea::Media => "Media",
            FunctionalArea::Apps => "Apps",
            FunctionalArea::System => "System",
            FunctionalArea::Comms => "Comms",
        }
    }
}

impl fmt::Display for FunctionalArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A literal or a reference to a bound slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Operand {
    Slot { slot: String },
    Literal(Value),
}

impl Operand {
    pub fn resolve(&self, slots: &BTreeMap<String, Value>) -> Option<Value> {
        match self {
            Operand::Slot { slot } => slots.get(slot).cloned(),
            Operand::Literal(v) => Some(v.clone()),
        }
    }
}

/// Values a slot can take.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Domain {
    Values { values: Vec<Value> },
    Range { min: f64, max: f64, step: f64 },
}

impl Domain {
    pub fn len(&self) -> u64 {
        match self {
            Domain::Values { values } => values.len() as u64,
            Domain::Range { min, max, step } => {
                if step.is_nan() || *step <= 0.0 || max < min {
                    0
                } else {
                    libm::floor((max - min) / step + 1e-9) as u64 + 1
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th value; ranges yield integers when min and step are whole.
    pub fn get(&self, i: u64) -> Option<Value> {
        if i >= self.len() {
            return None;
        }
        match self {
            Domain::Values { values } => values.get(i as usize).cloned(),
            Domain::Range { min, step, .. } => {
                let v = min + i as f64 * step;
                if libm::trunc(*min) == *min && libm::trunc(*step) == *step {
                    Some(Value::Int(v as i64))
                } else {
                    // Snap to the step grid so 0.1-style steps print cleanly.
                    let per = libm::round(1.0 / step).max(1.0);
                    Some(Value::Float(libm::round(v * per) / per))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub domain: Domain,
    /// Used instead of `domain` when the region is heat-prone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_prone_domain: Option<Domain>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredicateSpec {
    pub signal: String,
    pub op: Comparator,
    pub value: Operand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValidatorSpec {
    Check {
        check: String,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        args: BTreeMap<String, Operand>,
    },
    All { all: Vec<PredicateSpec> },
}

/// Starting position when the region anchor is not wanted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpsStart {
    pub lat: f64,
    pub lon: f64,
    #[serde(default)]
    pub heading_deg: f64,
}

/// An alert already showing when the episode starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlertSpec {
    pub kind: String,
    pub message: String,
}

pub const DEFAULT_MAX_STEPS: u32 = 15;

fn default_max_steps() -> u32 {
    DEFAULT_MAX_STEPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub template_id: String,
    pub category: Category,
    pub functional_area: FunctionalArea,
    pub instruction_template: String,
    #[serde(default)]
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub init_overrides: BTreeMap<String, Operand>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init_alerts: Vec<AlertSpec>,
    /// Name of a scenario in the suite's scenario library.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Region tags; a region qualifies when it carries all of them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub geo_requirements: Vec<String>,
    /// Whether solving the task requires knowing regional rules.
    #[serde(default)]
    pub geo_dependent: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gps: Option<GpsStart>,
    pub validator: ValidatorSpec,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TaskError {
    #[error("template parse error at line {line}, column {column}: {msg}")]
    ParseError { line: usize, column: usize, msg: String },
    #[error("duplicate template id `{0}`")]
    DuplicateId(String),
    #[error("template `{template}`: {detail}")]
    InvalidBinding { template: String, detail: String },
    #[error("region `{region}` lacks tags required by `{template}`")]
    GeoMismatch { template: String, region: String },
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("suite file `{0}` not found")]
    MissingFile(String),
}

fn bad(t: &TaskTemplate, detail: impl Into<String>) -> TaskError {
    TaskError::InvalidBinding { template: t.template_id.clone(), detail: detail.into() }
}

/// Names inside `{...}` in an instruction template.
pub fn placeholders(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

impl TaskTemplate {
    /// Checks placeholders, bindings and validator references.
    pub fn check(&self) -> Result<(), TaskError> {
        if self.template_id.is_empty() {
            return Err(bad(self, "empty template_id"));
        }
        if self.max_steps == 0 {
            return Err(bad(self, "max_steps must be positive"));
        }
        let mut names = BTreeSet::new();
        for s in &self.slots {
            if !names.insert(s.name.as_str()) {
                return Err(bad(self, format!("slot `{}` declared twice", s.name)));
            }
            if s.domain.is_empty() || s.heat_prone_domain.as_ref().is_some_and(Domain::is_empty) {
                return Err(bad(self, format!("slot `{}` has an empty domain", s.name)));
            }
        }
        for p in placeholders(&self.instruction_template) {
            if !names.contains(p) {
                return Err(bad(self, format!("placeholder `{{{p}}}` has no slot")));
            }
        }
        let operand_ok = |o: &Operand| match o {
            Operand::Slot { slot } => names.contains(slot.as_str()),
            Operand::Literal(_) => true,
        };
        for (path, v) in &self.init_overrides {
            let spec = signal::spec(path).filter(|s| !s.derived);
            let Some(spec) = spec else {
                return Err(bad(self, format!("unknown signal `{path}` in init_overrides")));
            };
            if !operand_ok(v) {
                return Err(bad(self, format!("init_overrides `{path}` references an undeclared slot")));
            }
            if let Operand::Literal(lit) = v {
                if spec.ty.coerce(lit).is_none() {
                    return Err(bad(self, format!("init_overrides `{path}` has a value of the wrong type")));
                }
            }
        }
        match &self.validator {
            ValidatorSpec::Check { check, args } => {
                let params = catalog::check_params(check).ok_or_else(|| bad(self, format!("unknown check `{check}`")))?;
                for p in params {
                    if !args.get(*p).is_some_and(operand_ok) {
                        return Err(bad(self, format!("check `{check}` needs argument `{p}` bound to a declared slot or literal")));
                    }
                }
                if let Some(extra) = args.keys().find(|k| !params.contains(&k.as_str())) {
                    return Err(bad(self, format!("check `{check}` takes no argument `{extra}`")));
                }
            }
            ValidatorSpec::All { all } => {
                if all.is_empty() {
                    return Err(bad(self, "empty validator conjunction"));
                }
                for p in all {
                    if signal::spec(&p.signal).is_none() {
                        return Err(bad(self, format!("validator reads unknown signal `{}`", p.signal)));
                    }
                    if !matches!(p.op, Comparator::Eq | Comparator::Ne | Comparator::Ge | Comparator::Le) {
                        return Err(bad(self, format!("validator comparator `{}` is not allowed", p.op.symbol())));
                    }
                    if !operand_ok(&p.value) {
                        return Err(bad(self, format!("validator on `{}` references an undeclared slot", p.signal)));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses one template file. Blank input is an empty list.
pub fn load_templates(text: &str) -> Result<Vec<TaskTemplate>, TaskError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let templates: Vec<TaskTemplate> = serde_json::from_str(text).map_err(|e| TaskError::ParseError {
        line: e.line(),
        column: e.column(),
        msg: format!("{e}"),
    })?;
    let mut ids = BTreeSet::new();
    for t in &templates {
        if !ids.insert(t.template_id.as_str()) {
            return Err(TaskError::DuplicateId(t.template_id.clone()));
        }
        t.check()?;
    }
    Ok(templates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_empty_list() {
        assert_eq!(load_templates("").unwrap(), Vec::new());
        assert_eq!(load_templates(" \n").unwrap(), Vec::new());
    }

    #[test]
    fn unknown_override_path() {
        let text = r#"[{"template_id": "x", "category": "ExplicitControl", "functional_area": "HVAC",
            "instruction_template": "Do it.", "init_overrides": {"hvac.warp_drive": 1},
            "validator": {"check": "check_ac_auto"}}]"#;
        assert!(matches!(load_templates(text), Err(TaskError::InvalidBinding { .. })));
    }

    #[test]
    fn parse_error_has_position() {
        match load_templates("[{\"template_id\": 3}]") {
            Err(TaskError::ParseError { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_unbound_placeholders() {
        let one = r#"{"template_id": "x", "category": "ExplicitControl", "functional_area": "HVAC",
            "instruction_template": "Do it.", "validator": {"check": "check_ac_auto"}}"#;
        let text = format!("[{one},{one}]");
        assert_eq!(load_templates(&text), Err(TaskError::DuplicateId("x".into())));
        let text = r#"[{"template_id": "y", "category": "ExplicitControl", "functional_area": "HVAC",
            "instruction_template": "Set {t}.", "validator": {"check": "check_ac_auto"}}]"#;
        assert!(matches!(load_templates(text), Err(TaskError::InvalidBinding { .. })));
        let text = r#"[{"template_id": "z", "category": "ExplicitControl", "functional_area": "HVAC",
            "instruction_template": "Set.", "validator": {"check": "check_temperature_setpoint", "args": {"t": {"slot": "t"}}}}]"#;
        assert!(matches!(load_templates(text), Err(TaskError::InvalidBinding { .. })));
    }

    #[test]
    fn domains() {
        let r = Domain::Range { min: 16.0, max: 30.0, step: 0.5 };
        assert_eq!(r.len(), 29);
        assert_eq!(r.get(12), Some(Value::Float(22.0)));
        let i = Domain::Range { min: 0.0, max: 100.0, step: 10.0 };
        assert_eq!(i.get(7), Some(Value::Int(70)));
        assert_eq!(i.get(11), None);
    }

    #[test]
    fn placeholder_scan() {
        assert_eq!(placeholders("Set {a} and {b}."), ["a", "b"]);
        assert!(placeholders("none").is_empty());
    }
}

#[cfg(test)]
mod suite_tests;
