use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use super::{catalog, AlertSpec, Category, FunctionalArea, GpsStart, TaskError, TaskTemplate, ValidatorSpec};
use crate::geo::{BBox, GpsTrack, RegionKb, RegionProfile};
use crate::predicate::Condition;
use crate::vehicle::{query_signal, snapshot_digest, ScenarioScript, Value, VehicleState};
use crate::Digest;

/// Validator with every slot reference replaced by its bound value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValidator {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    pub conditions: Vec<Condition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub template_id: String,
    pub category: Category,
    pub functional_area: FunctionalArea,
    pub seed: u64,
    pub bound_slots: BTreeMap<String, Value>,
    pub instruction: String,
    pub region_id: String,
    pub initial_digest: Digest,
    pub validator: BoundValidator,
    pub max_steps: u32,
    pub geo_dependent: bool,
    pub init_overrides: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init_alerts: Vec<AlertSpec>,
    #[serde(default)]
    pub scenario: ScenarioScript,
    pub gps: GpsStart,
}

/// Everything an episode starts from.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStart {
    pub state: VehicleState,
    pub track: GpsTrack,
    pub script: ScenarioScript,
    /// Outage zones of every region in the KB.
    pub outage_zones: Vec<BBox>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Per-slot affine maps `i = (offset + (seed mod n) * stride) mod n`, with
/// offset and stride drawn from a ChaCha8 stream keyed by the template id.
/// Consecutive seeds therefore visit distinct values until the domain is
/// exhausted.
fn slot_index(rng: &mut ChaCha8Rng, n: u64, seed: u64) -> u64 {
    let offset = rng.next_u64() % n;
    let mut stride = if n > 1 { 1 + rng.next_u64() % (n - 1) } else { 1 };
    let mut tries = 0;
    while gcd(stride, n) != 1 {
        stride = stride % (n - 1) + 1;
        tries += 1;
        if tries > n {
            stride = 1;
        }
    }
    (offset + (seed % n) * stride) % n
}

fn render(template: &str, slots: &BTreeMap<String, Value>) -> String {
    let mut out = String::from(template);
    for (name, v) in slots {
        out = out.replace(&format!("{{{name}}}"), &format!("{v}"));
    }
    out
}

pub(crate) fn initial_state(inst: &TaskInstance) -> VehicleState {
    let mut s = inst.scenario.apply_initial(&VehicleState::default());
    for (path, v) in &inst.init_overrides {
        s.put(path, v);
    }
    s.system.sim_clock = 0;
    for a in &inst.init_alerts {
        s = s.raise_alert(&a.kind, &a.message);
    }
    s
}

/// Binds slots for `seed` in `region` and renders the instruction.
pub fn instantiate(
    tmpl: &TaskTemplate,
    seed: u64,
    region: &RegionProfile,
    scenarios: &BTreeMap<String, ScenarioScript>,
) -> Result<TaskInstance, TaskError> {
    if !tmpl.geo_requirements.iter().all(|t| region.tags.contains(t)) {
        return Err(TaskError::GeoMismatch { template: tmpl.template_id.clone(), region: region.region_id.clone() });
    }
    let scenario = match &tmpl.scenario {
        Some(name) => scenarios.get(name).cloned().ok_or_else(|| TaskError::UnknownScenario(name.clone()))?,
        None => ScenarioScript::default(),
    };
    let key: [u8; 32] = Sha256::digest(tmpl.template_id.as_bytes()).into();
    let mut rng = ChaCha8Rng::from_seed(key);
    let mut bound = BTreeMap::new();
    for slot in &tmpl.slots {
        let domain = match (&slot.heat_prone_domain, region.climate.heat_prone) {
            (Some(d), true) => d,
            _ => &slot.domain,
        };
        let i = slot_index(&mut rng, domain.len(), seed);
        bound.insert(slot.name.clone(), domain.get(i).expect("index within domain"));
    }
    let unbound = |what: &str| TaskError::InvalidBinding {
        template: tmpl.template_id.clone(),
        detail: format!("{what} references an unbound slot"),
    };
    let mut init_overrides = BTreeMap::new();
    for (path, op) in &tmpl.init_overrides {
        init_overrides.insert(path.clone(), op.resolve(&bound).ok_or_else(|| unbound(path))?);
    }
    let validator = match &tmpl.validator {
        ValidatorSpec::Check { check, args } => {
            let conditions = catalog::expand(check, |name| args.get(name).and_then(|o| o.resolve(&bound)))
                .ok_or_else(|| unbound(check))?;
            BoundValidator { check: Some(check.clone()), conditions }
        }
        ValidatorSpec::All { all } => {
            let mut conditions = Vec::new();
            for p in all {
                let value = p.value.resolve(&bound).ok_or_else(|| unbound(&p.signal))?;
                conditions.push(Condition { signal: p.signal.clone(), op: p.op, value });
            }
            BoundValidator { check: None, conditions }
        }
    };
    let gps = tmpl.gps.unwrap_or(GpsStart { lat: region.anchor[0], lon: region.anchor[1], heading_deg: 0.0 });
    let mut inst = TaskInstance {
        template_id: tmpl.template_id.clone(),
        category: tmpl.category,
        functional_area: tmpl.functional_area,
        seed,
        instruction: render(&tmpl.instruction_template, &bound),
        bound_slots: bound,
        region_id: region.region_id.clone(),
        initial_digest: Digest([0; 32]),
        validator,
        max_steps: tmpl.max_steps,
        geo_dependent: tmpl.geo_dependent,
        init_overrides,
        init_alerts: tmpl.init_alerts.clone(),
        scenario,
        gps,
    };
    inst.initial_digest = snapshot_digest(&initial_state(&inst));
    Ok(inst)
}

/// Builds the starting state, GPS track and scenario for an instance.
pub fn initialize_episode(inst: &TaskInstance, kb: &RegionKb) -> Result<EpisodeStart, TaskError> {
    kb.region(&inst.region_id).ok_or_else(|| TaskError::UnknownRegion(inst.region_id.clone()))?;
    let outage_zones: Vec<BBox> = kb.regions.iter().flat_map(|r| r.outage_bboxes()).collect();
    let track = GpsTrack::start(inst.gps.lat, inst.gps.lon, inst.gps.heading_deg, 0, &outage_zones);
    Ok(EpisodeStart { state: initial_state(inst), track, script: inst.scenario.clone(), outage_zones })
}

/// Binary reward: every bound condition holds, read through `query_signal`.
pub fn validate(inst: &TaskInstance, state: &VehicleState) -> bool {
    inst.validator
        .conditions
        .iter()
        .all(|c| query_signal(state, &c.signal).is_ok_and(|v| c.op.holds(&v, &c.value)))
}
