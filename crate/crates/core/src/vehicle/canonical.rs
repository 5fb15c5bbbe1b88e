//! Canonical text form of a [`VehicleState`] and its digest.
//!
//! Format: one flat JSON object, keys are signal paths in registry order,
//! floats always carry exactly one decimal, followed by the alert list.
//! Parsing and re-serializing is byte-identical.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use super::signal::{Value, SIGNALS};
use super::{Alert, VehicleState};
use crate::digest::Digest;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CanonicalError {
    #[error("malformed canonical state: {0}")]
    Malformed(String),
    #[error("missing or ill-typed field `{0}`")]
    Field(String),
}

pub(crate) fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) => {
            let _ = write!(out, "{f:.1}");
        }
        Value::Text(s) => write_str(out, s),
    }
}

pub(crate) fn write_str(out: &mut String, s: &str) {
    // serde_json string escaping is already canonical.
    out.push_str(&serde_json::to_string(s).unwrap_or_default());
}

/// Canonical UTF-8 serialization.
pub fn canonical_bytes(state: &VehicleState) -> Vec<u8> {
    let mut out = String::with_capacity(1024);
    out.push('{');
    for spec in SIGNALS.iter().filter(|s| !s.derived) {
        write_str(&mut out, spec.path);
        out.push(':');
        write_value(&mut out, &state.get(spec.path).unwrap_or(Value::Null));
        out.push(',');
    }
    out.push_str("\"safety.active_alerts\":[");
    for (i, a) in state.safety.active_alerts.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str("{\"kind\":");
        write_str(&mut out, &a.kind);
        out.push_str(",\"message\":");
        write_str(&mut out, &a.message);
        let _ = write!(out, ",\"raised_at\":{}}}", a.raised_at);
    }
    out.push_str("]}");
    out.into_bytes()
}

/// Inverse of [`canonical_bytes`].
pub fn parse_canonical(bytes: &[u8]) -> Result<VehicleState, CanonicalError> {
    let obj: serde_json::Map<String, serde_json::Value> =
        serde_json::from_slice(bytes).map_err(|e| CanonicalError::Malformed(alloc::format!("{e}")))?;
    let mut state = VehicleState::default();
    for spec in SIGNALS.iter().filter(|s| !s.derived) {
        let field = || CanonicalError::Field(spec.path.into());
        let v = obj.get(spec.path).and_then(Value::from_json).ok_or_else(field)?;
        if !state.put(spec.path, &v) {
            return Err(field());
        }
    }
    let alerts = obj
        .get("safety.active_alerts")
        .cloned()
        .ok_or_else(|| CanonicalError::Field("safety.active_alerts".into()))?;
    state.safety.active_alerts = serde_json::from_value::<Vec<Alert>>(alerts)
        .map_err(|_| CanonicalError::Field("safety.active_alerts".into()))?;
    Ok(state)
}

/// SHA-256 over the canonical serialization.
pub fn snapshot_digest(state: &VehicleState) -> Digest {
    Digest::of(&canonical_bytes(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{apply_control, ControlCommand};

    #[test]
    fn digest_is_deterministic_and_sensitive() {
        let a = VehicleState::default();
        let b = VehicleState::default();
        assert_eq!(snapshot_digest(&a), snapshot_digest(&a));
        assert_eq!(snapshot_digest(&a), snapshot_digest(&b));
        let c = apply_control(&a, &ControlCommand::set("hvac.fan_speed", Value::Int(6))).unwrap();
        assert_ne!(snapshot_digest(&a), snapshot_digest(&c));
    }

    #[test]
    fn floats_have_one_decimal() {
        let text = String::from_utf8(canonical_bytes(&VehicleState::default())).unwrap();
        assert!(text.starts_with("{\"hvac.setpoint_c\":21.0,\"hvac.fan_speed\":2,"));
        assert!(text.contains("\"nav.destination\":null"));
        assert!(text.ends_with("\"safety.active_alerts\":[]}"));
    }

    #[test]
    fn round_trip_with_alerts() {
        let mut s = VehicleState::default();
        s.system.sim_clock = 12;
        let s = s.raise_alert("agent", "Speed \"way\" over limit");
        let bytes = canonical_bytes(&s);
        let back = parse_canonical(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(canonical_bytes(&back), bytes);
    }

    #[test]
    fn rejects_missing_fields() {
        assert!(matches!(parse_canonical(b"{}"), Err(CanonicalError::Field(_))));
        assert!(matches!(parse_canonical(b"not json"), Err(CanonicalError::Malformed(_))));
    }
}
