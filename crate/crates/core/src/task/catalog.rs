//! Named validator checks and their exact predicates.
//!
//! | check | predicate |
//! |---|---|
//! | `check_fan_speed_max` | `hvac.fan_speed == 6` |
//! | `check_driver_seat_heater_enable` | `hvac.seat_heater_driver >= 1` |
//! | `check_ac_auto` | `hvac.ac_mode == "Auto"` |
//! | `check_media_play` | `media.playing == true` |
//! | `check_front_defroster_enable` | `hvac.defrost_front == true` |
//! | `check_rear_defroster_enable` | `hvac.defrost_rear == true` |
//! | `check_raw_defroster_enable` | alias of `check_rear_defroster_enable` |
//! | `check_screen_brightness` | `system.screen_brightness >= 70` |
//! | `check_safety_center_open` | `safety.notification_center_open == true` |
//! | `check_nav_destination_set` | `nav.destination != null` |
//! | `check_temperature_setpoint(t)` | `hvac.setpoint_c == t` |
//! | `check_volume_at_most(v)` | `media.volume <= v` |
//! | `check_fog_lights_on` | `motion.fog_lights == true` |
//! | `check_high_beams_off` | `motion.high_beams == false` |

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::predicate::{Comparator, Condition};
use crate::vehicle::Value;

/// Brightness a screen needs to count as readable.
pub const BRIGHTNESS_THRESHOLD: i64 = 70;

pub const CHECKS: [&str; 14] = [
    "check_fan_speed_max",
    "check_driver_seat_heater_enable",
    "check_ac_auto",
    "check_media_play",
    "check_front_defroster_enable",
    "check_rear_defroster_enable",
    "check_raw_defroster_enable",
    "check_screen_brightness",
    "check_safety_center_open",
    "check_nav_destination_set",
    "check_temperature_setpoint",
    "check_volume_at_most",
    "check_fog_lights_on",
    "check_high_beams_off",
];

/// Argument names a check expects.
pub fn check_params(name: &str) -> Option<&'static [&'static str]> {
    match name {
        "check_temperature_setpoint" => Some(&["t"]),
        "check_volume_at_most" => Some(&["v"]),
        n if CHECKS.contains(&n) => Some(&[]),
        _ => None,
    }
}

fn cond(signal: &str, op: Comparator, value: Value) -> Condition {
    Condition { signal: String::from(signal), op, value }
}

/// Expands a check into conditions. `arg` looks up bound arguments by name.
pub fn expand(name: &str, arg: impl Fn(&str) -> Option<Value>) -> Option<Vec<Condition>> {
    use Comparator::*;
    let c = match name {
        "check_fan_speed_max" => cond("hvac.fan_speed", Eq, Value::Int(6)),
        "check_driver_seat_heater_enable" => cond("hvac.seat_heater_driver", Ge, Value::Int(1)),
        "check_ac_auto" => cond("hvac.ac_mode", Eq, Value::text("Auto")),
        "check_media_play" => cond("media.playing", Eq, Value::Bool(true)),
        "check_front_defroster_enable" => cond("hvac.defrost_front", Eq, Value::Bool(true)),
        "check_rear_defroster_enable" | "check_raw_defroster_enable" => cond("hvac.defrost_rear", Eq, Value::Bool(true)),
        "check_screen_brightness" => cond("system.screen_brightness", Ge, Value::Int(BRIGHTNESS_THRESHOLD)),
        "check_safety_center_open" => cond("safety.notification_center_open", Eq, Value::Bool(true)),
        "check_nav_destination_set" => cond("nav.destination", Ne, Value::Null),
        "check_temperature_setpoint" => cond("hvac.setpoint_c", Eq, arg("t")?),
        "check_volume_at_most" => cond("media.volume", Le, arg("v")?),
        "check_fog_lights_on" => cond("motion.fog_lights", Eq, Value::Bool(true)),
        "check_high_beams_off" => cond("motion.high_beams", Eq, Value::Bool(false)),
        _ => return None,
    };
    Some(vec![c])
}
