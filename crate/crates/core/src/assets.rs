//! Data files compiled into the library.

use crate::gui::Layouts;

pub const BUNDLED_LAYOUTS: &str = include_str!("../data/layouts.json");

/// Parses the bundled layouts; they are validated by the test suite.
pub fn layouts() -> Layouts {
    Layouts::from_json(BUNDLED_LAYOUTS).expect("bundled layouts are valid")
}

pub const BUNDLED_REGIONS: &str = include_str!("../data/regions.json");

pub fn regions() -> crate::geo::RegionKb {
    crate::geo::RegionKb::from_json(BUNDLED_REGIONS).expect("bundled region KB is valid")
}

pub const BUNDLED_SUITE_MANIFEST: &str = include_str!("../data/suite/manifest.json");

/// Files the bundled manifest refers to.
pub const BUNDLED_SUITE_FILES: [(&str, &str); 5] = [
    ("explicit_control.json", include_str!("../data/suite/explicit_control.json")),
    ("implicit_intent.json", include_str!("../data/suite/implicit_intent.json")),
    ("driving_alignment.json", include_str!("../data/suite/driving_alignment.json")),
    ("environment_alerts.json", include_str!("../data/suite/environment_alerts.json")),
    ("scenarios.json", include_str!("../data/suite/scenarios.json")),
];

pub fn suite() -> crate::task::Suite {
    crate::task::Suite::load(BUNDLED_SUITE_MANIFEST, |name| {
        BUNDLED_SUITE_FILES.iter().find(|(n, _)| *n == name).map(|(_, text)| alloc::string::String::from(*text))
    })
    .expect("bundled suite is valid")
}

pub const BUNDLED_PROMPT_PROFILES: &str = include_str!("../data/prompt_profiles.json");

pub fn prompt_profiles() -> crate::agents::PromptProfiles {
    serde_json::from_str(BUNDLED_PROMPT_PROFILES).expect("bundled prompt profiles are valid")
}

/// JSON Schema of the action plan policies answer with.
pub const ACTION_SCHEMA: &str = include_str!("../data/action_schema.json");
