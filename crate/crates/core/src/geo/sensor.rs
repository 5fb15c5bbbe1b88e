use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::RegionProfile;
use crate::vehicle::{Value, VehicleState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryKind {
    Weather,
    SpeedRules,
    Equipment,
    Norms,
}

impl QueryKind {
    pub const ALL: [QueryKind; 4] = [QueryKind::Weather, QueryKind::SpeedRules, QueryKind::Equipment, QueryKind::Norms];

    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Weather => "Weather",
            QueryKind::SpeedRules => "SpeedRules",
            QueryKind::Equipment => "Equipment",
            QueryKind::Norms => "Norms",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("unknown query kind `{0}`")]
pub struct UnknownQueryKind(pub String);

impl FromStr for QueryKind {
    type Err = UnknownQueryKind;
    fn from_str(s: &str) -> Result<Self, UnknownQueryKind> {
        QueryKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| UnknownQueryKind(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub key: String,
    pub value: Value,
}

fn fact(key: &str, value: Value) -> Fact {
    Fact { key: key.to_string(), value }
}

/// Answer of one virtual-sensor query. `violations` lists the ids of rules
/// the current state breaks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextReport {
    pub kind: QueryKind,
    pub facts: Vec<Fact>,
    pub source_region: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
}

impl ContextReport {
    pub fn get(&self, key: &str) -> Option<&Value> {
        self.facts.iter().find(|f| f.key == key).map(|f| &f.value)
    }
}

/// Season at `sim_clock` seconds after the simulated epoch (January 1st).
fn season(sim_clock: i64) -> &'static str {
    let doy = sim_clock.div_euclid(86_400).rem_euclid(365);
    match doy {
        0..=58 | 334.. => "winter",
        59..=150 => "spring",
        151..=242 => "summer",
        _ => "autumn",
    }
}

/// Queries the offline knowledge base as if it were a live service.
pub fn virtual_sensor_query(profile: &RegionProfile, kind: QueryKind, state: &VehicleState) -> ContextReport {
    let mut facts = Vec::new();
    let mut violations = Vec::new();
    match kind {
        QueryKind::Weather => {
            let s = season(state.system.sim_clock);
            let t = &profile.climate.mean_temp_c;
            let mean = match s {
                "winter" => t.winter,
                "spring" => t.spring,
                "summer" => t.summer,
                _ => t.autumn,
            };
            facts.push(fact("season", Value::text(s)));
            facts.push(fact("mean_temp_c", Value::Float(mean)));
            facts.push(fact("humidity_pct", Value::Int(profile.climate.humidity_pct as i64)));
            facts.push(fact("heat_prone", Value::Bool(profile.climate.heat_prone)));
        }
        QueryKind::SpeedRules => {
            let road = state.road.road_type;
            let limit = profile.limit_for(road);
            facts.push(fact("road_type", Value::text(road.name())));
            facts.push(fact("limit_kmh", Value::Int(limit as i64)));
            if state.motion.speed_kmh > limit as f64 {
                violations.push(format!("overspeed_{}", road.name().to_ascii_lowercase()));
            }
        }
        QueryKind::Equipment => {
            for rule in &profile.regulations {
                let violated = rule.when.iter().all(|c| c.holds(state));
                facts.push(fact(&rule.rule_id, Value::text(if violated { "violated" } else { "ok" })));
                if violated {
                    violations.push(rule.rule_id.clone());
                }
            }
            if facts.is_empty() {
                facts.push(fact("regulations", Value::text("none")));
            }
        }
        QueryKind::Norms => {
            for (i, n) in profile.norms.iter().enumerate() {
                facts.push(fact(&format!("norm.{i}"), Value::text(n.as_str())));
            }
            if facts.is_empty() {
                facts.push(fact("norms", Value::text("none")));
            }
        }
    }
    ContextReport { kind, facts, source_region: profile.region_id.clone(), violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(id: &str) -> RegionProfile {
        crate::assets::regions().region(id).unwrap().clone()
    }

    #[test]
    fn paris_urban_limit() {
        let r = virtual_sensor_query(&region("paris_urban"), QueryKind::SpeedRules, &VehicleState::default());
        assert_eq!(r.get("limit_kmh"), Some(&Value::Int(50)));
        assert!(r.violations.is_empty());
        let mut fast = VehicleState::default();
        fast.motion.speed_kmh = 80.0;
        let r = virtual_sensor_query(&region("paris_urban"), QueryKind::SpeedRules, &fast);
        assert_eq!(r.violations, ["overspeed_urban"]);
    }

    #[test]
    fn default_norms_non_empty() {
        let kb = crate::assets::regions();
        let r = virtual_sensor_query(kb.default_region(), QueryKind::Norms, &VehicleState::default());
        assert!(!r.facts.is_empty());
        assert!(r.facts.iter().all(|f| f.key.starts_with("norm.")));
    }

    #[test]
    fn high_beams_flagged_in_paris() {
        let mut s = VehicleState::default();
        s.motion.high_beams = true;
        let r = virtual_sensor_query(&region("paris_urban"), QueryKind::Equipment, &s);
        assert_eq!(r.violations, ["no_high_beams_urban"]);
        s.motion.high_beams = false;
        assert!(virtual_sensor_query(&region("paris_urban"), QueryKind::Equipment, &s).violations.is_empty());
    }

    #[test]
    fn weather_facts_and_kind_parsing() {
        let r = virtual_sensor_query(&region("hot_coastal"), QueryKind::Weather, &VehicleState::default());
        assert_eq!(r.get("season"), Some(&Value::text("winter")));
        assert_eq!(r.get("heat_prone"), Some(&Value::Bool(true)));
        assert_eq!("Equipment".parse::<QueryKind>(), Ok(QueryKind::Equipment));
        assert_eq!("Traffic".parse::<QueryKind>(), Err(UnknownQueryKind("Traffic".into())));
    }
}
