//! A suite is a manifest naming template files plus a scenario library.
//!
//! ```json
//! { "suite_version": 1,
//!   "template_files": ["explicit_control.json", "implicit_intent.json"],
//!   "scenario_file": "scenarios.json" }
//! ```
//!
//! The scenario library maps names to scenario scripts:
//! `{"fog_bank": [{"t_s": 0, "set": {"phenomenon.weather": "Fog"}}]}`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{instantiate, load_templates, TaskError, TaskInstance, TaskTemplate};
use crate::geo::{RegionKb, RegionProfile};
use crate::vehicle::ScenarioScript;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub suite_version: u32,
    pub template_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Suite {
    pub suite_version: u32,
    pub templates: Vec<TaskTemplate>,
    pub scenarios: BTreeMap<String, ScenarioScript>,
}

fn parse_err(file: &str, e: serde_json::Error) -> TaskError {
    TaskError::ParseError { line: e.line(), column: e.column(), msg: format!("{file}: {e}") }
}

impl Suite {
    /// Loads a suite; `read` resolves file names listed in the manifest.
    pub fn load(manifest: &str, read: impl Fn(&str) -> Option<String>) -> Result<Suite, TaskError> {
        let m: SuiteManifest = serde_json::from_str(manifest).map_err(|e| parse_err("manifest", e))?;
        let mut scenarios = BTreeMap::new();
        if let Some(f) = &m.scenario_file {
            let text = read(f).ok_or_else(|| TaskError::MissingFile(f.clone()))?;
            scenarios = serde_json::from_str::<BTreeMap<String, ScenarioScript>>(&text).map_err(|e| parse_err(f, e))?;
            for (name, s) in &scenarios {
                s.validate().map_err(|e| TaskError::ParseError { line: 0, column: 0, msg: format!("{f}: scenario `{name}`: {e}") })?;
            }
        }
        let mut templates = Vec::new();
        let mut ids = BTreeSet::new();
        for f in &m.template_files {
            let text = read(f).ok_or_else(|| TaskError::MissingFile(f.clone()))?;
            for t in load_templates(&text).map_err(|e| match e {
                TaskError::ParseError { line, column, msg } => TaskError::ParseError { line, column, msg: format!("{f}: {msg}") },
                other => other,
            })? {
                if !ids.insert(t.template_id.clone()) {
                    return Err(TaskError::DuplicateId(t.template_id));
                }
                if let Some(s) = &t.scenario {
                    if !scenarios.contains_key(s) {
                        return Err(TaskError::UnknownScenario(s.clone()));
                    }
                }
                templates.push(t);
            }
        }
        Ok(Suite { suite_version: m.suite_version, templates, scenarios })
    }

    pub fn template(&self, id: &str) -> Option<&TaskTemplate> {
        self.templates.iter().find(|t| t.template_id == id)
    }

    /// Regions carrying every tag the template requires, in KB order.
    pub fn eligible_regions<'a>(tmpl: &TaskTemplate, kb: &'a RegionKb) -> Vec<&'a RegionProfile> {
        kb.regions.iter().filter(|r| tmpl.geo_requirements.iter().all(|t| r.tags.contains(t))).collect()
    }

    /// The region a suite run uses for `(tmpl, seed)`: eligible regions are
    /// rotated by seed.
    pub fn region_for<'a>(tmpl: &TaskTemplate, seed: u64, kb: &'a RegionKb) -> Result<&'a RegionProfile, TaskError> {
        let eligible = Self::eligible_regions(tmpl, kb);
        if eligible.is_empty() {
            return Err(TaskError::GeoMismatch { template: tmpl.template_id.clone(), region: String::from("*") });
        }
        Ok(eligible[(seed % eligible.len() as u64) as usize])
    }

    pub fn instantiate(&self, tmpl: &TaskTemplate, seed: u64, region: &RegionProfile) -> Result<TaskInstance, TaskError> {
        instantiate(tmpl, seed, region, &self.scenarios)
    }
}
