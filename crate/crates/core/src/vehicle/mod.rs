//! Cockpit and driving-environment state machine.
//!
//! [`VehicleState`] is a plain value. Every operation here takes it by
//! reference and returns a new value; nothing mutates in place from the
//! caller's point of view.

mod canonical;
mod control;
mod dynamics;
pub mod signal;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use canonical::{canonical_bytes, parse_canonical, snapshot_digest, CanonicalError};
pub use control::{apply_control, query_signal, ControlCommand, ControlError, ControlOp};
pub use dynamics::{
    tick, tick_with, DynamicsError, FogRule, ScenarioEntry, ScenarioError, ScenarioScript,
};
pub use signal::{SignalSpec, SignalType, Value, SIGNALS};

/// Wall-clock time that `system.sim_clock == 0` stands for.
pub const SIM_EPOCH: &str = "2024-01-01T08:00:00";

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name { $(#[serde(rename = $label)] $variant),+ }

        impl $name {
            pub const ALL: [$name; [$($label),+].len()] = [$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $label),+ }
            }
        }
    };
}

named_enum!(AcMode { Off => "Off", Manual => "Manual", Auto => "Auto" });
named_enum!(MediaSource {
    Radio => "Radio",
    Bluetooth => "Bluetooth",
    Usb => "USB",
    Streaming => "Streaming",
});
named_enum!(Weather { Clear => "Clear", Rain => "Rain", Fog => "Fog", Snow => "Snow", Heat => "Heat" });
named_enum!(RoadType { Urban => "Urban", Highway => "Highway", Rural => "Rural" });

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hvac {
    pub setpoint_c: f64,
    /// 0..=6, 6 is "Max".
    pub fan_speed: u8,
    pub ac_mode: AcMode,
    pub seat_heater_driver: u8,
    pub seat_heater_passenger: u8,
    pub defrost_front: bool,
    pub defrost_rear: bool,
    pub recirculation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Media {
    pub playing: bool,
    pub volume: u8,
    pub source: MediaSource,
    pub track_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nav {
    pub destination: Option<String>,
    pub route_active: bool,
    pub rerouting: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub screen_brightness: u8,
    /// Seconds since [`SIM_EPOCH`].
    pub sim_clock: i64,
    pub language: String,
    /// Launchable app surface currently in the foreground.
    pub active_app: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comms {
    pub call_active: bool,
    pub unread_messages: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub kind: String,
    pub message: String,
    pub raised_at: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Safety {
    pub notification_center_open: bool,
    pub active_alerts: Vec<Alert>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub speed_kmh: f64,
    pub high_beams: bool,
    pub fog_lights: bool,
    pub wiper_level: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phenomenon {
    pub weather: Weather,
    pub visibility_m: f64,
    pub ambient_temp_c: f64,
    pub humidity_pct: u8,
    pub fog_front_window: bool,
    pub fog_rear_window: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub road_type: RoadType,
    pub posted_limit_kmh: u16,
}

/// Full cockpit and environment signal set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub hvac: Hvac,
    pub media: Media,
    pub nav: Nav,
    pub system: SystemState,
    pub comms: Comms,
    pub safety: Safety,
    pub motion: Motion,
    pub phenomenon: Phenomenon,
    pub road: Road,
}

impl Default for VehicleState {
    fn default() -> Self {
        VehicleState {
            hvac: Hvac {
                setpoint_c: 21.0,
                fan_speed: 2,
                ac_mode: AcMode::Off,
                seat_heater_driver: 0,
                seat_heater_passenger: 0,
                defrost_front: false,
                defrost_rear: false,
                recirculation: false,
            },
            media: Media {
                playing: false,
                volume: 30,
                source: MediaSource::Radio,
                track_id: String::from("fm-101.1"),
            },
            nav: Nav { destination: None, route_active: false, rerouting: false },
            system: SystemState {
                screen_brightness: 40,
                sim_clock: 0,
                language: String::from("en-US"),
                active_app: None,
            },
            comms: Comms { call_active: false, unread_messages: 0 },
            safety: Safety { notification_center_open: false, active_alerts: Vec::new() },
            motion: Motion { speed_kmh: 0.0, high_beams: false, fog_lights: false, wiper_level: 0 },
            phenomenon: Phenomenon {
                weather: Weather::Clear,
                visibility_m: 10_000.0,
                ambient_temp_c: 20.0,
                humidity_pct: 50,
                fog_front_window: false,
                fog_rear_window: false,
            },
            road: Road { road_type: RoadType::Urban, posted_limit_kmh: 50 },
        }
    }
}

impl VehicleState {
    /// Checks the range invariants that the setter cannot violate but a
    /// hand-built or deserialized value might.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        for spec in SIGNALS {
            let v = self.get(spec.path).ok_or("unreadable signal")?;
            if spec.ty.coerce(&v).as_ref() != Some(&v) {
                return Err(spec.path);
            }
        }
        if self.safety.active_alerts.iter().any(|a| a.raised_at > self.system.sim_clock) {
            return Err("safety.active_alerts");
        }
        Ok(())
    }

    /// Appends an alert stamped with the current clock.
    pub fn raise_alert(&self, kind: &str, message: &str) -> VehicleState {
        let mut next = self.clone();
        next.safety.active_alerts.push(Alert {
            kind: kind.into(),
            message: message.into(),
            raised_at: self.system.sim_clock,
        });
        next
    }
}
