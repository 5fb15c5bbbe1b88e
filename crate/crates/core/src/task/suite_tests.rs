use alloc::collections::BTreeSet;

use super::*;
use crate::assets;
use crate::vehicle::{apply_control, snapshot_digest, ControlCommand, VehicleState};

fn first_instance(suite: &Suite, id: &str, seed: u64) -> TaskInstance {
    let kb = assets::regions();
    let t = suite.template(id).unwrap();
    let r = Suite::region_for(t, seed, &kb).unwrap();
    suite.instantiate(t, seed, r).unwrap()
}

#[test]
fn bundled_suite_coverage() {
    let s = assets::suite();
    assert!(s.templates.len() >= 40);
    for c in Category::ALL {
        assert!(s.templates.iter().filter(|t| t.category == c).count() >= 5, "{c}");
    }
    for a in FunctionalArea::ALL {
        assert!(s.templates.iter().filter(|t| t.functional_area == a).count() >= 2, "{a}");
    }
}

#[test]
fn instantiation_is_deterministic() {
    let s = assets::suite();
    let a = first_instance(&s, "ec_set_temperature", 7);
    let b = first_instance(&s, "ec_set_temperature", 7);
    assert_eq!(a, b);
    let t = a.bound_slots["t"].as_f64().unwrap();
    assert!((16.0..=30.0).contains(&t));
    assert_eq!(a.instruction, alloc::format!("Set the temperature to {} degrees.", a.bound_slots["t"]));
    assert!(!a.instruction.contains('{'));
}

#[test]
fn hot_regions_sample_cooler_targets() {
    let s = assets::suite();
    let kb = assets::regions();
    let t = s.template("ec_set_temperature").unwrap();
    let hot = kb.region("hot_coastal").unwrap();
    for seed in 0..20 {
        let i = s.instantiate(t, seed, hot).unwrap();
        assert!(i.bound_slots["t"].as_f64().unwrap() <= 22.0);
    }
}

#[test]
fn paris_overspeed_instance() {
    let s = assets::suite();
    let kb = assets::regions();
    let t = s.template("da_urban_overspeed").unwrap();
    let paris = kb.region("paris_urban").unwrap();
    let inst = s.instantiate(t, 0, paris).unwrap();
    assert_eq!(inst.init_overrides["motion.speed_kmh"], crate::vehicle::Value::Int(80));
    assert_eq!(inst.init_overrides["road.road_type"], crate::vehicle::Value::text("Urban"));
    let start = initialize_episode(&inst, &kb).unwrap();
    assert_eq!(start.state.motion.speed_kmh, 80.0);
    assert_eq!((start.track.reported.lat, start.track.reported.lon), (48.8566, 2.3522));
    assert_eq!(snapshot_digest(&start.state), inst.initial_digest);
    let again = initialize_episode(&inst, &kb).unwrap();
    assert_eq!(snapshot_digest(&again.state), snapshot_digest(&start.state));
    // Only urban regions qualify.
    let hot = kb.region("hot_coastal").unwrap();
    assert!(matches!(s.instantiate(t, 0, hot), Err(TaskError::GeoMismatch { .. })));
}

#[test]
fn unknown_region_on_initialize() {
    let s = assets::suite();
    let mut inst = first_instance(&s, "ec_fan_speed_max", 1);
    inst.region_id = "atlantis".into();
    assert_eq!(initialize_episode(&inst, &assets::regions()), Err(TaskError::UnknownRegion("atlantis".into())));
}

#[test]
fn override_free_instance_starts_from_default() {
    let s = assets::suite();
    let inst = first_instance(&s, "ec_fan_speed_max", 3);
    assert_eq!(inst.initial_digest, snapshot_digest(&VehicleState::default()));
}

#[test]
fn table_validators() {
    let s = assets::suite();
    let fan = first_instance(&s, "ec_fan_speed_max", 0);
    let d = VehicleState::default();
    assert!(!validate(&fan, &d));
    let max = apply_control(&d, &ControlCommand::set("hvac.fan_speed", crate::vehicle::Value::Int(6))).unwrap();
    assert!(validate(&fan, &max));
    let hands = first_instance(&s, "ii_hands_freezing", 0);
    let auto = apply_control(&d, &ControlCommand::set("hvac.ac_mode", crate::vehicle::Value::text("Auto"))).unwrap();
    assert!(!validate(&hands, &d) && validate(&hands, &auto));
    let lonely = first_instance(&s, "ii_lonely_silence", 0);
    let play = apply_control(&d, &ControlCommand::set("media.playing", crate::vehicle::Value::Bool(true))).unwrap();
    assert!(!validate(&lonely, &d) && validate(&lonely, &play));
}

#[test]
fn every_template_starts_unsatisfied() {
    let s = assets::suite();
    let kb = assets::regions();
    for t in &s.templates {
        for seed in 0..10 {
            for r in Suite::eligible_regions(t, &kb) {
                let inst = s.instantiate(t, seed, r).unwrap();
                let start = initialize_episode(&inst, &kb).unwrap();
                assert!(!validate(&inst, &start.state), "{} seed {seed} in {}", t.template_id, r.region_id);
            }
        }
    }
}

#[test]
fn seeds_spread_over_domains() {
    let s = assets::suite();
    let kb = assets::regions();
    fn lcm(a: u64, b: u64) -> u64 {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 { a } else { gcd(b, a % b) }
        }
        a / gcd(a, b) * b
    }
    for t in &s.templates {
        let region = Suite::eligible_regions(t, &kb)[0];
        let sizes = t.slots.iter().map(|sl| match (&sl.heat_prone_domain, region.climate.heat_prone) {
            (Some(d), true) => d.len(),
            _ => sl.domain.len(),
        });
        let period = sizes.fold(1, lcm);
        let distinct: BTreeSet<_> = (0..10)
            .map(|seed| {
                let i = s.instantiate(t, seed, region).unwrap();
                serde_json::to_string(&i.bound_slots).unwrap()
            })
            .collect();
        assert_eq!(distinct.len() as u64, period.min(10), "{}", t.template_id);
    }
}

#[test]
fn scenario_references_resolve() {
    let s = assets::suite();
    let inst = first_instance(&s, "ea_low_visibility", 0);
    assert!(!inst.scenario.entries.is_empty());
    let kb = assets::regions();
    let start = initialize_episode(&inst, &kb).unwrap();
    assert_eq!(start.state.phenomenon.weather, crate::vehicle::Weather::Fog);
}
