use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::signal::{self, SignalType, Value};
use super::VehicleState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlOp {
    Set,
    Increment,
    Decrement,
    Toggle,
}

/// A write request against one signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub target: String,
    pub op: ControlOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
}

impl ControlCommand {
    pub fn set(target: &str, value: Value) -> Self {
        ControlCommand { target: target.into(), op: ControlOp::Set, value: Some(value) }
    }

    pub fn toggle(target: &str) -> Self {
        ControlCommand { target: target.into(), op: ControlOp::Toggle, value: None }
    }

    /// Increment (positive) or decrement (negative) by `amount`.
    pub fn step(target: &str, amount: Value) -> Self {
        let negative = amount.as_f64().is_some_and(|x| x < 0.0);
        let magnitude = match amount {
            Value::Int(i) => Value::Int(i.abs()),
            Value::Float(f) => Value::Float(libm::fabs(f)),
            other => other,
        };
        ControlCommand {
            target: target.into(),
            op: if negative { ControlOp::Decrement } else { ControlOp::Increment },
            value: Some(magnitude),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ControlError {
    #[error("unknown signal `{0}`")]
    UnknownSignal(String),
    #[error("signal `{0}` is read-only")]
    ReadOnlySignal(String),
    #[error("type mismatch on `{path}`: {detail}")]
    TypeMismatch { path: String, detail: &'static str },
}

fn mismatch(path: &str, detail: &'static str) -> ControlError {
    ControlError::TypeMismatch { path: path.into(), detail }
}

/// Reads any signal, writable or not.
pub fn query_signal(state: &VehicleState, path: &str) -> Result<Value, ControlError> {
    state.get(path).ok_or_else(|| ControlError::UnknownSignal(path.into()))
}

/// Applies one command and returns the resulting state.
///
/// Numeric writes clamp at range edges. The only cascade is turning on the
/// front defroster, which forces the fan to at least speed 1.
pub fn apply_control(state: &VehicleState, cmd: &ControlCommand) -> Result<VehicleState, ControlError> {
    let path = cmd.target.as_str();
    let spec = signal::spec(path).ok_or_else(|| ControlError::UnknownSignal(path.into()))?;
    if !spec.writable {
        return Err(ControlError::ReadOnlySignal(path.into()));
    }
    let current = state.get(path).ok_or_else(|| ControlError::UnknownSignal(path.into()))?;

    let next_value = match cmd.op {
        ControlOp::Set => {
            let v = cmd.value.as_ref().ok_or_else(|| mismatch(path, "Set requires a value"))?;
            spec.ty.coerce(v).ok_or_else(|| mismatch(path, "value does not fit signal type"))?
        }
        ControlOp::Toggle => match current {
            Value::Bool(b) => Value::Bool(!b),
            _ => return Err(mismatch(path, "Toggle requires a boolean signal")),
        },
        ControlOp::Increment | ControlOp::Decrement => {
            let sign = if cmd.op == ControlOp::Increment { 1.0 } else { -1.0 };
            let amount = match &cmd.value {
                None => spec.ty.step().ok_or_else(|| mismatch(path, "signal is not numeric"))?,
                Some(v) => v.as_f64().ok_or_else(|| mismatch(path, "step amount must be numeric"))?,
            };
            match spec.ty {
                SignalType::Int { min, max } => {
                    let cur = current.as_f64().unwrap_or_default() as i64;
                    let delta = libm::round(amount * sign) as i64;
                    Value::Int(cur.saturating_add(delta).clamp(min, max))
                }
                SignalType::Float { .. } => {
                    let cur = current.as_f64().unwrap_or_default();
                    spec.ty
                        .coerce(&Value::Float(cur + sign * amount))
                        .ok_or_else(|| mismatch(path, "non-finite result"))?
                }
                _ => return Err(mismatch(path, "Increment/Decrement requires a numeric signal")),
            }
        }
    };

    let mut next = state.clone();
    next.put(path, &next_value);
    if path == "hvac.defrost_front" && next.hvac.defrost_front && next.hvac.fan_speed < 1 {
        next.hvac.fan_speed = 1;
    }
    Ok(next)
}
