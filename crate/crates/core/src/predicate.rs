//! Declarative comparisons of a signal against a literal.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::vehicle::{Value, VehicleState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Ge => ">=",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Lt => "<",
        }
    }

    /// Numbers compare numerically (ints and floats mix); other values only
    /// support `==` and `!=`, and ordering them is false.
    pub fn holds(self, actual: &Value, expected: &Value) -> bool {
        if let (Some(a), Some(b)) = (actual.as_f64(), expected.as_f64()) {
            return match self {
                Comparator::Eq => a == b,
                Comparator::Ne => a != b,
                Comparator::Ge => a >= b,
                Comparator::Le => a <= b,
                Comparator::Gt => a > b,
                Comparator::Lt => a < b,
            };
        }
        match self {
            Comparator::Eq => actual == expected,
            Comparator::Ne => actual != expected,
            _ => false,
        }
    }
}

/// `signal op value`, e.g. `motion.high_beams == true`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub signal: String,
    pub op: Comparator,
    pub value: Value,
}

impl Condition {
    /// False when the signal does not exist.
    pub fn holds(&self, state: &VehicleState) -> bool {
        state.get(&self.signal).is_some_and(|v| self.op.holds(&v, &self.value))
    }
}
