//! Action plans: the JSON object a policy answers with.
//!
//! ```json
//! {"reasoning": "fan is at 2, raising it", "action": {"type": "tap", "index": 12}, "confidence": 0.9}
//! ```
//!
//! Action types are matched case-insensitively (`tap`, `swipe`,
//! `input_text`, `api_call`, `status`, `wait`). `index` is accepted for
//! `som_index` and `value` for the status kind. A bare action object without
//! the `reasoning`/`action` wrapper is also accepted.

use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::episode::{Action, Observation, TapTarget};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionPlan {
    #[serde(default)]
    pub reasoning: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no JSON object found")]
    NoJsonFound,
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("unknown SoM index {0}")]
    UnknownSomIndex(u32),
}

/// First well-formed JSON object in `text`, skipping prose and code fences.
fn first_object(text: &str) -> Option<Map<String, Json>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Json>();
        if let Some(Ok(Json::Object(m))) = stream.next() {
            return Some(m);
        }
    }
    None
}

fn canonical_type(t: &str) -> Option<&'static str> {
    let t = t.to_ascii_lowercase().replace(['_', '-', ' '], "");
    Some(match t.as_str() {
        "tap" | "click" => "Tap",
        "swipe" => "Swipe",
        "inputtext" | "typetext" | "type" => "InputText",
        "apicall" | "api" => "ApiCall",
        "status" => "Status",
        "wait" => "Wait",
        _ => return None,
    })
}

fn normalize_action(obj: &Map<String, Json>) -> Result<Action, PlanError> {
    let ty = obj
        .get("type")
        .and_then(Json::as_str)
        .ok_or_else(|| PlanError::SchemaViolation("action needs a string `type`".to_string()))?;
    let canon = canonical_type(ty).ok_or_else(|| PlanError::SchemaViolation(format!("unknown action type `{ty}`")))?;
    let mut out = Map::new();
    out.insert("type".to_string(), Json::String(canon.to_string()));
    for (k, v) in obj {
        let key = match (canon, k.as_str()) {
            (_, "type") => continue,
            ("Tap" | "InputText", "index") => "som_index",
            ("Status", "value") => "status",
            (_, other) => other,
        };
        let v = match (canon, key, v) {
            ("Status", "status", Json::String(s)) => {
                let mut c = s.to_ascii_lowercase();
                if let Some(first) = c.get_mut(0..1) {
                    first.make_ascii_uppercase();
                }
                Json::String(c)
            }
            _ => v.clone(),
        };
        out.insert(key.to_string(), v);
    }
    serde_json::from_value(Json::Object(out)).map_err(|e| PlanError::SchemaViolation(format!("{e}")))
}

/// Parses a plan without checking SoM indices.
pub fn parse_action_plan(text: &str) -> Result<ActionPlan, PlanError> {
    let obj = first_object(text).ok_or(PlanError::NoJsonFound)?;
    let (action_obj, reasoning, confidence) = match obj.get("action") {
        Some(Json::Object(a)) => (a, obj.get("reasoning"), obj.get("confidence")),
        Some(_) => return Err(PlanError::SchemaViolation("`action` must be an object".to_string())),
        None => (&obj, None, None),
    };
    let reasoning = match reasoning {
        None | Some(Json::Null) => String::new(),
        Some(Json::String(s)) => s.clone(),
        Some(_) => return Err(PlanError::SchemaViolation("`reasoning` must be text".to_string())),
    };
    let confidence = match confidence {
        None | Some(Json::Null) => None,
        Some(c) => match c.as_f64() {
            Some(c) if (0.0..=1.0).contains(&c) => Some(c),
            _ => return Err(PlanError::SchemaViolation("`confidence` must be within 0..1".to_string())),
        },
    };
    Ok(ActionPlan { reasoning, action: normalize_action(action_obj)?, confidence })
}

/// Parses a plan and checks SoM references against the observation.
pub fn parse_action_plan_for(text: &str, obs: &Observation) -> Result<ActionPlan, PlanError> {
    let plan = parse_action_plan(text)?;
    let index = match &plan.action {
        Action::Tap { target: TapTarget::Index { som_index } } => Some(*som_index),
        Action::InputText { som_index, .. } => Some(*som_index),
        _ => None,
    };
    if let Some(i) = index {
        let known = match (&obs.som_map, &obs.a11y) {
            (Some(map), _) => map.contains_key(&i),
            (None, Some(tree)) => tree.by_som_index(i).is_some(),
            (None, None) => false,
        };
        if !known {
            return Err(PlanError::UnknownSomIndex(i));
        }
    }
    Ok(plan)
}

impl ActionPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::StatusKind;

    #[test]
    fn lowercase_tap_with_index() {
        let p = parse_action_plan(r#"{"reasoning":"press it","action":{"type":"tap","index":3}}"#).unwrap();
        assert_eq!(p.action, Action::tap_index(3));
        assert_eq!(p.reasoning, "press it");
    }

    #[test]
    fn fenced_status_with_prose() {
        let p = parse_action_plan("Sure! ```json {\"action\":{\"type\":\"status\",\"value\":\"infeasible\"}} ```").unwrap();
        assert_eq!(p.action, Action::status(StatusKind::Infeasible));
    }

    #[test]
    fn no_json() {
        assert_eq!(parse_action_plan("no json here"), Err(PlanError::NoJsonFound));
        assert_eq!(parse_action_plan("{ broken"), Err(PlanError::NoJsonFound));
    }

    #[test]
    fn skips_malformed_prefix_object() {
        let p = parse_action_plan(r#"{oops} then {"type":"wait"}"#).unwrap();
        assert_eq!(p.action, Action::Wait);
    }

    #[test]
    fn schema_violations() {
        for t in [
            r#"{"action":{"type":"fly"}}"#,
            r#"{"action":{"index":3}}"#,
            r#"{"action":"tap"}"#,
            r#"{"action":{"type":"tap","index":-1}}"#,
            r#"{"action":{"type":"wait"},"confidence":2}"#,
            r#"{"action":{"type":"status","value":"maybe"}}"#,
        ] {
            assert!(matches!(parse_action_plan(t), Err(PlanError::SchemaViolation(_))), "{t}");
        }
    }

    #[test]
    fn round_trips_engine_json() {
        let plan = ActionPlan { reasoning: "r".into(), action: Action::api("open_safety_center"), confidence: Some(0.5) };
        assert_eq!(parse_action_plan(&plan.to_json()).unwrap(), plan);
    }

    proptest::proptest! {
        #[test]
        fn total_on_arbitrary_text(s in ".*") {
            let _ = parse_action_plan(&s);
        }

        #[test]
        fn total_on_json_like_text(s in r#"[\{\}\[\]":,a-z0-9 ]{0,60}"#) {
            let _ = parse_action_plan(&s);
        }
    }
}
