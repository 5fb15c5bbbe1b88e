//! Time evolution: scripted environment overrides plus window fogging.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::signal::{self, Value};
use super::VehicleState;

/// One timed batch of environment overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub t_s: f64,
    pub set: BTreeMap<String, Value>,
}

/// Timed overrides of `phenomenon.*`, `road.*` and `motion.*` signals.
///
/// File form is a JSON array of `{"t_s": number, "set": {path: value}}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScenarioScript {
    pub entries: Vec<ScenarioEntry>,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("scenario entry {index}: `{path}` is not an environment signal")]
    NotEnvironment { index: usize, path: String },
    #[error("scenario entry {index}: bad value for `{path}`")]
    BadValue { index: usize, path: String },
    #[error("scenario entry {index}: time must be finite and non-negative")]
    BadTime { index: usize },
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let script: ScenarioScript = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            msg: alloc::format!("{e}"),
        })?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (index, e) in self.entries.iter().enumerate() {
            if !e.t_s.is_finite() || e.t_s < 0.0 {
                return Err(ScenarioError::BadTime { index });
            }
            for (path, v) in &e.set {
                let spec = signal::spec(path)
                    .filter(|s| signal::is_environment_path(s.path) && !s.derived)
                    .ok_or_else(|| ScenarioError::NotEnvironment { index, path: path.clone() })?;
                if spec.ty.coerce(v).is_none() {
                    return Err(ScenarioError::BadValue { index, path: path.clone() });
                }
            }
        }
        Ok(())
    }

    /// Entries with `after < t_s <= until`, in time order (file order on ties).
    fn window(&self, after: f64, until: f64) -> impl Iterator<Item = &ScenarioEntry> {
        let mut hits: Vec<&ScenarioEntry> =
            self.entries.iter().filter(|e| e.t_s > after && e.t_s <= until).collect();
        hits.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
        hits.into_iter()
    }

    /// Applies the entries scheduled at or before time zero.
    pub(crate) fn apply_initial(&self, state: &VehicleState) -> VehicleState {
        let mut next = state.clone();
        let mut initial: Vec<&ScenarioEntry> = self.entries.iter().filter(|e| e.t_s <= 0.0).collect();
        initial.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
        for e in initial {
            for (path, v) in &e.set {
                next.put(path, v);
            }
        }
        next
    }
}

/// Window fogging thresholds.
///
/// A window fogs when humidity is at least `humidity_min_pct`, the cabin
/// setpoint exceeds the outside temperature by at least `temp_gap_c`, and the
/// matching defroster is off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FogRule {
    pub humidity_min_pct: u8,
    pub temp_gap_c: f64,
}

impl Default for FogRule {
    fn default() -> Self {
        FogRule { humidity_min_pct: 85, temp_gap_c: 8.0 }
    }
}

impl FogRule {
    fn conditions_met(&self, s: &VehicleState) -> bool {
        s.phenomenon.humidity_pct >= self.humidity_min_pct
            && s.hvac.setpoint_c - s.phenomenon.ambient_temp_c >= self.temp_gap_c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error("time step must be positive")]
    NonPositiveDt,
}

/// Advances the clock by `dt_s` seconds with the default [`FogRule`].
pub fn tick(state: &VehicleState, dt_s: i64, script: &ScenarioScript) -> Result<VehicleState, DynamicsError> {
    tick_with(state, dt_s, script, &FogRule::default())
}

pub fn tick_with(
    state: &VehicleState,
    dt_s: i64,
    script: &ScenarioScript,
    fog: &FogRule,
) -> Result<VehicleState, DynamicsError> {
    if dt_s <= 0 {
        return Err(DynamicsError::NonPositiveDt);
    }
    let mut next = state.clone();
    let before = state.system.sim_clock;
    next.system.sim_clock = before.saturating_add(dt_s);
    for entry in script.window(before as f64, next.system.sim_clock as f64) {
        for (path, v) in &entry.set {
            next.put(path, v);
        }
    }
    if fog.conditions_met(&next) {
        if !next.hvac.defrost_front {
            next.phenomenon.fog_front_window = true;
        }
        if !next.hvac.defrost_rear {
            next.phenomenon.fog_rear_window = true;
        }
    }
    Ok(next)
}
