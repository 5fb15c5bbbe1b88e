#![allow(dead_code)]

use autocab_core::vehicle::{
    AcMode, Alert, Comms, Hvac, Media, MediaSource, Motion, Nav, Phenomenon, Road, RoadType, Safety, SystemState,
    VehicleState, Weather,
};
use rand::seq::IndexedRandom;
use rand::Rng;

const TEXTS: [&str; 4] = ["fm-101.1", "Louvre", "en-US", "podcast-7"];
const APPS: [&str; 3] = ["Maps", "Weather", "Music"];

fn opt_text<R: Rng>(rng: &mut R, pool: &[&str]) -> Option<String> {
    rng.random_bool(0.5).then(|| pool.choose(rng).unwrap().to_string())
}

fn pick<T: Copy, R: Rng>(rng: &mut R, all: &[T]) -> T {
    *all.choose(rng).unwrap()
}

/// Uniform over each field's legal range, half-degree setpoints, one
/// decimal on continuous environment values.
pub fn random_state<R: Rng>(rng: &mut R) -> VehicleState {
    let sim_clock = rng.random_range(0..100_000);
    let alerts = (0..rng.random_range(0..3))
        .map(|i| Alert { kind: format!("k{i}"), message: "check".into(), raised_at: rng.random_range(0..=sim_clock) })
        .collect();
    VehicleState {
        hvac: Hvac {
            setpoint_c: 16.0 + 0.5 * rng.random_range(0..=28) as f64,
            fan_speed: rng.random_range(0..=6),
            ac_mode: pick(rng, &AcMode::ALL),
            seat_heater_driver: rng.random_range(0..=3),
            seat_heater_passenger: rng.random_range(0..=3),
            defrost_front: rng.random(),
            defrost_rear: rng.random(),
            recirculation: rng.random(),
        },
        media: Media {
            playing: rng.random(),
            volume: rng.random_range(0..=100),
            source: pick(rng, &MediaSource::ALL),
            track_id: TEXTS.choose(rng).unwrap().to_string(),
        },
        nav: Nav { destination: opt_text(rng, &TEXTS), route_active: rng.random(), rerouting: rng.random() },
        system: SystemState {
            screen_brightness: rng.random_range(0..=100),
            sim_clock,
            language: "en-US".into(),
            active_app: opt_text(rng, &APPS),
        },
        comms: Comms { call_active: rng.random(), unread_messages: rng.random_range(0..50) },
        safety: Safety { notification_center_open: rng.random(), active_alerts: alerts },
        motion: Motion {
            speed_kmh: rng.random_range(0..1300) as f64 / 10.0,
            high_beams: rng.random(),
            fog_lights: rng.random(),
            wiper_level: rng.random_range(0..=3),
        },
        phenomenon: Phenomenon {
            weather: pick(rng, &Weather::ALL),
            visibility_m: rng.random_range(1..100_000) as f64 / 10.0,
            ambient_temp_c: rng.random_range(-300..450) as f64 / 10.0,
            humidity_pct: rng.random_range(0..=100),
            fog_front_window: rng.random(),
            fog_rear_window: rng.random(),
        },
        road: Road { road_type: pick(rng, &RoadType::ALL), posted_limit_kmh: rng.random_range(20..=130) },
    }
}

/// Trace text with the informational wall-clock field removed.
pub fn strip_wall_clock(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            if let Some(o) = v.as_object_mut() {
                o.remove("wall_clock");
            }
            serde_json::to_string(&v).unwrap()
        })
        .collect::<Vec<_>>()
        .join("\n")
}
