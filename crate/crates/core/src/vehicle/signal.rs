//! Signal registry: every addressable field of [`VehicleState`] by dotted path.
//!
//! The table below is the single place that knows a signal's type, range and
//! writability. Reads, writes, canonical serialization and layout validation
//! all go through it.

use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};

use super::{AcMode, MediaSource, RoadType, VehicleState, Weather};

/// A typed signal value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Text(_) => "text",
        }
    }

    pub(crate) fn from_json(v: &serde_json::Value) -> Option<Value> {
        Some(match v {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Bool(b) => Value::Bool(*b),
            serde_json::Value::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None => Value::Float(n.as_f64()?),
            },
            serde_json::Value::String(s) => Value::Text(s.clone()),
            _ => return None,
        })
    }
}

/// Human-facing rendering used in labels, instructions and diffs.
/// Floats that are whole numbers print without a fractional part.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("none"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => {
                if libm::fabs(*x - libm::round(*x)) < 1e-9 {
                    write!(f, "{}", libm::round(*x) as i64)
                } else {
                    write!(f, "{x:.1}")
                }
            }
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SignalType {
    Bool,
    Int { min: i64, max: i64 },
    Float { min: f64, max: f64, step: f64 },
    Choice(&'static [&'static str]),
    Text,
    OptText,
}

impl SignalType {
    pub fn is_numeric(&self) -> bool {
        matches!(self, SignalType::Int { .. } | SignalType::Float { .. })
    }

    /// Numeric range as floats, if any.
    pub fn range(&self) -> Option<(f64, f64)> {
        match *self {
            SignalType::Int { min, max } => Some((min as f64, max as f64)),
            SignalType::Float { min, max, .. } => Some((min, max)),
            _ => None,
        }
    }

    /// Smallest representable increment for numeric signals.
    pub fn step(&self) -> Option<f64> {
        match *self {
            SignalType::Int { .. } => Some(1.0),
            SignalType::Float { step, .. } => Some(step),
            _ => None,
        }
    }

    /// Type-check and normalize a value: clamps numerics into range and snaps
    /// floats onto the step grid.
    pub fn coerce(&self, v: &Value) -> Option<Value> {
        match (*self, v) {
            (SignalType::Bool, Value::Bool(b)) => Some(Value::Bool(*b)),
            (SignalType::Int { min, max }, Value::Int(i)) => Some(Value::Int((*i).clamp(min, max))),
            (SignalType::Float { min, max, step }, v) => {
                let x = v.as_f64()?;
                if !x.is_finite() {
                    return None;
                }
                // Steps are 1/n for integer n; dividing by n keeps decimals exact.
                let per_unit = libm::round(1.0 / step);
                let snapped = libm::round(x * per_unit) / per_unit;
                Some(Value::Float(snapped.clamp(min, max)))
            }
            (SignalType::Choice(names), Value::Text(s)) => {
                names.iter().find(|n| **n == s).map(|n| Value::text(*n))
            }
            (SignalType::Text, Value::Text(s)) => Some(Value::Text(s.clone())),
            (SignalType::OptText, Value::Text(s)) => Some(Value::Text(s.clone())),
            (SignalType::OptText, Value::Null) => Some(Value::Null),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SignalSpec {
    pub path: &'static str,
    pub ty: SignalType,
    /// Whether agents (through GUI or API) may change it.
    pub writable: bool,
    /// Derived signals are computed from other fields and never serialized.
    pub derived: bool,
}

const fn sig(path: &'static str, ty: SignalType, writable: bool) -> SignalSpec {
    SignalSpec { path, ty, writable, derived: false }
}

pub const AC_MODES: &[&str] = &["Off", "Manual", "Auto"];
pub const MEDIA_SOURCES: &[&str] = &["Radio", "Bluetooth", "USB", "Streaming"];
pub const WEATHERS: &[&str] = &["Clear", "Rain", "Fog", "Snow", "Heat"];
pub const ROAD_TYPES: &[&str] = &["Urban", "Highway", "Rural"];

use SignalType::*;

/// All signals in declaration order. Canonical serialization follows this order.
pub const SIGNALS: &[SignalSpec] = &[
    sig("hvac.setpoint_c", Float { min: 16.0, max: 30.0, step: 0.5 }, true),
    sig("hvac.fan_speed", Int { min: 0, max: 6 }, true),
    sig("hvac.ac_mode", Choice(AC_MODES), true),
    sig("hvac.seat_heater_driver", Int { min: 0, max: 3 }, true),
    sig("hvac.seat_heater_passenger", Int { min: 0, max: 3 }, true),
    sig("hvac.defrost_front", Bool, true),
    sig("hvac.defrost_rear", Bool, true),
    sig("hvac.recirculation", Bool, true),
    sig("media.playing", Bool, true),
    sig("media.volume", Int { min: 0, max: 100 }, true),
    sig("media.source", Choice(MEDIA_SOURCES), true),
    sig("media.track_id", Text, true),
    sig("nav.destination", OptText, true),
    sig("nav.route_active", Bool, true),
    sig("nav.rerouting", Bool, true),
    sig("system.screen_brightness", Int { min: 0, max: 100 }, true),
    sig("system.sim_clock", Int { min: 0, max: i64::MAX }, false),
    sig("system.language", Text, true),
    sig("system.active_app", OptText, true),
    sig("comms.call_active", Bool, true),
    sig("comms.unread_messages", Int { min: 0, max: 9999 }, true),
    sig("safety.notification_center_open", Bool, true),
    SignalSpec {
        path: "safety.alert_count",
        ty: Int { min: 0, max: i64::MAX },
        writable: false,
        derived: true,
    },
    sig("motion.speed_kmh", Float { min: 0.0, max: 400.0, step: 0.1 }, false),
    sig("motion.high_beams", Bool, true),
    sig("motion.fog_lights", Bool, true),
    sig("motion.wiper_level", Int { min: 0, max: 3 }, true),
    sig("phenomenon.weather", Choice(WEATHERS), false),
    sig("phenomenon.visibility_m", Float { min: 0.1, max: 100_000.0, step: 0.1 }, false),
    sig("phenomenon.ambient_temp_c", Float { min: -60.0, max: 60.0, step: 0.1 }, false),
    sig("phenomenon.humidity_pct", Int { min: 0, max: 100 }, false),
    sig("phenomenon.fog_front_window", Bool, false),
    sig("phenomenon.fog_rear_window", Bool, false),
    sig("road.road_type", Choice(ROAD_TYPES), false),
    sig("road.posted_limit_kmh", Int { min: 1, max: 400 }, false),
];

pub fn spec(path: &str) -> Option<&'static SignalSpec> {
    SIGNALS.iter().find(|s| s.path == path)
}

/// Paths a scenario script may override.
pub fn is_environment_path(path: &str) -> bool {
    path.starts_with("phenomenon.") || path.starts_with("road.") || path.starts_with("motion.")
}

fn choice<T: Copy>(names: &[&str], all: &[T], v: &Value) -> T {
    let s = v.as_text().unwrap_or_default();
    let idx = names.iter().position(|n| *n == s).unwrap_or(0);
    all[idx]
}

impl VehicleState {
    /// Reads a signal. Unknown paths yield `None`.
    pub(crate) fn get(&self, path: &str) -> Option<Value> {
        use Value as V;
        let opt = |o: &Option<String>| o.clone().map(V::Text).unwrap_or(V::Null);
        Some(match path {
            "hvac.setpoint_c" => V::Float(self.hvac.setpoint_c),
            "hvac.fan_speed" => V::Int(self.hvac.fan_speed.into()),
            "hvac.ac_mode" => V::text(self.hvac.ac_mode.name()),
            "hvac.seat_heater_driver" => V::Int(self.hvac.seat_heater_driver.into()),
            "hvac.seat_heater_passenger" => V::Int(self.hvac.seat_heater_passenger.into()),
            "hvac.defrost_front" => V::Bool(self.hvac.defrost_front),
            "hvac.defrost_rear" => V::Bool(self.hvac.defrost_rear),
            "hvac.recirculation" => V::Bool(self.hvac.recirculation),
            "media.playing" => V::Bool(self.media.playing),
            "media.volume" => V::Int(self.media.volume.into()),
            "media.source" => V::text(self.media.source.name()),
            "media.track_id" => V::Text(self.media.track_id.clone()),
            "nav.destination" => opt(&self.nav.destination),
            "nav.route_active" => V::Bool(self.nav.route_active),
            "nav.rerouting" => V::Bool(self.nav.rerouting),
            "system.screen_brightness" => V::Int(self.system.screen_brightness.into()),
            "system.sim_clock" => V::Int(self.system.sim_clock),
            "system.language" => V::Text(self.system.language.clone()),
            "system.active_app" => opt(&self.system.active_app),
            "comms.call_active" => V::Bool(self.comms.call_active),
            "comms.unread_messages" => V::Int(self.comms.unread_messages.into()),
            "safety.notification_center_open" => V::Bool(self.safety.notification_center_open),
            "safety.alert_count" => V::Int(self.safety.active_alerts.len() as i64),
            "motion.speed_kmh" => V::Float(self.motion.speed_kmh),
            "motion.high_beams" => V::Bool(self.motion.high_beams),
            "motion.fog_lights" => V::Bool(self.motion.fog_lights),
            "motion.wiper_level" => V::Int(self.motion.wiper_level.into()),
            "phenomenon.weather" => V::text(self.phenomenon.weather.name()),
            "phenomenon.visibility_m" => V::Float(self.phenomenon.visibility_m),
            "phenomenon.ambient_temp_c" => V::Float(self.phenomenon.ambient_temp_c),
            "phenomenon.humidity_pct" => V::Int(self.phenomenon.humidity_pct.into()),
            "phenomenon.fog_front_window" => V::Bool(self.phenomenon.fog_front_window),
            "phenomenon.fog_rear_window" => V::Bool(self.phenomenon.fog_rear_window),
            "road.road_type" => V::text(self.road.road_type.name()),
            "road.posted_limit_kmh" => V::Int(self.road.posted_limit_kmh.into()),
            _ => return None,
        })
    }

    /// Writes an already-coerced value. Ignores writability; callers enforce it.
    /// Returns false if the path is unknown, derived, or the value has the wrong type.
    pub(crate) fn put(&mut self, path: &str, raw: &Value) -> bool {
        let Some(spec) = spec(path) else { return false };
        if spec.derived {
            return false;
        }
        let Some(v) = spec.ty.coerce(raw) else { return false };
        let int = |v: &Value| match v {
            Value::Int(i) => *i,
            _ => 0,
        };
        let flt = |v: &Value| v.as_f64().unwrap_or_default();
        let bln = |v: &Value| v.as_bool().unwrap_or_default();
        let txt = |v: &Value| v.as_text().unwrap_or_default().to_string();
        let opt = |v: &Value| v.as_text().map(ToString::to_string);
        match path {
            "hvac.setpoint_c" => self.hvac.setpoint_c = flt(&v),
            "hvac.fan_speed" => self.hvac.fan_speed = int(&v) as u8,
            "hvac.ac_mode" => self.hvac.ac_mode = choice(AC_MODES, &AcMode::ALL, &v),
            "hvac.seat_heater_driver" => self.hvac.seat_heater_driver = int(&v) as u8,
            "hvac.seat_heater_passenger" => self.hvac.seat_heater_passenger = int(&v) as u8,
            "hvac.defrost_front" => self.hvac.defrost_front = bln(&v),
            "hvac.defrost_rear" => self.hvac.defrost_rear = bln(&v),
            "hvac.recirculation" => self.hvac.recirculation = bln(&v),
            "media.playing" => self.media.playing = bln(&v),
            "media.volume" => self.media.volume = int(&v) as u8,
            "media.source" => self.media.source = choice(MEDIA_SOURCES, &MediaSource::ALL, &v),
            "media.track_id" => self.media.track_id = txt(&v),
            "nav.destination" => self.nav.destination = opt(&v),
            "nav.route_active" => self.nav.route_active = bln(&v),
            "nav.rerouting" => self.nav.rerouting = bln(&v),
            "system.screen_brightness" => self.system.screen_brightness = int(&v) as u8,
            "system.sim_clock" => self.system.sim_clock = int(&v),
            "system.language" => self.system.language = txt(&v),
            "system.active_app" => self.system.active_app = opt(&v),
            "comms.call_active" => self.comms.call_active = bln(&v),
            "comms.unread_messages" => self.comms.unread_messages = int(&v) as u32,
            "safety.notification_center_open" => self.safety.notification_center_open = bln(&v),
            "motion.speed_kmh" => self.motion.speed_kmh = flt(&v),
            "motion.high_beams" => self.motion.high_beams = bln(&v),
            "motion.fog_lights" => self.motion.fog_lights = bln(&v),
            "motion.wiper_level" => self.motion.wiper_level = int(&v) as u8,
            "phenomenon.weather" => self.phenomenon.weather = choice(WEATHERS, &Weather::ALL, &v),
            "phenomenon.visibility_m" => self.phenomenon.visibility_m = flt(&v),
            "phenomenon.ambient_temp_c" => self.phenomenon.ambient_temp_c = flt(&v),
            "phenomenon.humidity_pct" => self.phenomenon.humidity_pct = int(&v) as u8,
            "phenomenon.fog_front_window" => self.phenomenon.fog_front_window = bln(&v),
            "phenomenon.fog_rear_window" => self.phenomenon.fog_rear_window = bln(&v),
            "road.road_type" => self.road.road_type = choice(ROAD_TYPES, &RoadType::ALL, &v),
            "road.posted_limit_kmh" => self.road.posted_limit_kmh = int(&v) as u16,
            _ => return false,
        }
        true
    }
}
