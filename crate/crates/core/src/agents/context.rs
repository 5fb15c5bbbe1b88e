use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::episode::Observation;
use crate::geo::{dead_reckon, lookup_region, virtual_sensor_query, ContextReport, GeoFix, QueryKind, RegionKb};
use crate::vehicle::VehicleState;

/// Queries the geo-context stage issues, in prompt order.
pub const CONTEXT_QUERIES: [QueryKind; 3] = [QueryKind::SpeedRules, QueryKind::Weather, QueryKind::Equipment];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoContext {
    /// Position the region lookup used.
    pub fix: GeoFix,
    /// The position was dead-reckoned from the last good fix.
    pub estimated: bool,
    pub region_id: String,
    pub reports: Vec<ContextReport>,
}

impl GeoContext {
    pub fn violations(&self) -> impl Iterator<Item = &str> {
        self.reports.iter().flat_map(|r| r.violations.iter().map(String::as_str))
    }

    pub fn has_violations(&self) -> bool {
        self.violations().next().is_some()
    }
}

/// Reconstructs the signals a sensor query reads from what the observation
/// exposes. The GPS timestamp stands in for the simulation clock.
fn observed_state(obs: &Observation, fix: &GeoFix) -> VehicleState {
    let mut s = VehicleState::default();
    for (path, v) in &obs.signals {
        s.put(path, v);
    }
    s.system.sim_clock = fix.timestamp.max(0);
    s
}

/// Region lookup plus speed, weather and equipment queries. `None` without
/// a GPS fix.
pub fn geo_context_stage(obs: &Observation, kb: &RegionKb) -> Option<GeoContext> {
    let reported = obs.gps?;
    let (fix, estimated) = if reported.is_lost() {
        let dt = reported.timestamp - reported.last_good_at;
        let speed = obs.signals.get("motion.speed_kmh").and_then(|v| v.as_f64()).unwrap_or(0.0);
        match dead_reckon(&reported, speed, reported.heading_deg, dt) {
            Ok(f) => (f, true),
            Err(_) => (GeoFix { estimated: true, ..reported }, true),
        }
    } else {
        (reported, false)
    };
    let region = lookup_region(kb, &fix);
    let state = observed_state(obs, &fix);
    let reports = CONTEXT_QUERIES.iter().map(|k| virtual_sensor_query(region, *k, &state)).collect();
    Some(GeoContext { fix, estimated, region_id: region.region_id.clone(), reports })
}
