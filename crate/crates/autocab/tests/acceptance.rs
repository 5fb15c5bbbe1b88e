//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use autocab::bench::{run_suite, RunOutcome, RunSpec};
use autocab::store::TraceStore;
use autocab::World;
use autocab_core::agents::{PipelineAgent, Variant};
use autocab_core::episode::{replay, run_episode, Action, EpisodeTrace, ReplayError, StatusKind};
use autocab_core::geo::{advance_fix, GeoFix};
use autocab_core::gui::{annotate_som, build_ui_tree, dispatch_tap, node_effect, render, ScreenId};
use autocab_core::task::{catalog, validate, BoundValidator, Category, Suite};
use autocab_core::vehicle::{canonical_bytes, Value, VehicleState};
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

const SEEDS: u64 = 5;
const DETERMINISM_BUDGET: Duration = Duration::from_secs(120);
const VALIDATOR_SAMPLES: usize = 1000;
const SOM_STATES: usize = 200;
const GEOMETRY_SAMPLES: usize = 1000;
const GEOMETRY_TOLERANCE: f64 = 0.01;
const PEAK_MEMORY_LIMIT_KB: u64 = 512 * 1024;
const DISK_LIMIT_BYTES: u64 = 100 * 1024 * 1024;
const PARIS: (f64, f64) = (48.8566, 2.3522);
const PARIS_SPEED_KMH: f64 = 80.0;

struct Verdict {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn main() -> ExitCode {
    let world = World::bundled();
    let tmp = tempfile::tempdir().expect("temp dir");
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut verdicts = Vec::new();

    let (det, run) = determinism(&world, tmp.path(), jobs);
    verdicts.push(det);
    verdicts.push(oracle_completeness(&run.traces));
    verdicts.push(ablation_flip(&world, &run.traces));
    verdicts.push(validator_equivalence(&world));
    verdicts.push(som_grounding());
    verdicts.push(geometry());
    verdicts.push(replay_integrity(&world, &tmp.path().join("a")));
    verdicts.push(footprint(&tmp.path().join("a")));

    let mut failed = 0;
    for v in &verdicts {
        println!("{} {:<24} {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}

fn suite_run(world: &World, dir: &Path, jobs: usize) -> RunOutcome {
    let spec = RunSpec { seeds: SEEDS, jobs, ..RunSpec::default() };
    run_suite(world, &spec, Some(&TraceStore::new(dir))).expect("suite run")
}

fn relative_files(dir: &Path) -> BTreeMap<PathBuf, String> {
    TraceStore::new(dir)
        .list()
        .unwrap()
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p.strip_prefix(dir).unwrap().to_path_buf(), common::strip_wall_clock(&text))
        })
        .collect()
}

fn determinism(world: &World, tmp: &Path, jobs: usize) -> (Verdict, RunOutcome) {
    let start = Instant::now();
    let a = suite_run(world, &tmp.join("a"), jobs);
    let b = suite_run(world, &tmp.join("b"), jobs);
    let elapsed = start.elapsed();
    let expected = world.suite.templates.len() * SEEDS as usize * Variant::ALL.len();
    let (fa, fb) = (relative_files(&tmp.join("a")), relative_files(&tmp.join("b")));
    let differing = fa.iter().filter(|(k, v)| fb.get(*k) != Some(v)).count() + fb.keys().filter(|k| !fa.contains_key(*k)).count();
    let reports_equal = a.report.to_json() == b.report.to_json();
    let pass = fa.len() == expected && differing == 0 && reports_equal && a.failures.is_empty() && elapsed < DETERMINISM_BUDGET;
    let detail = format!(
        "{} traces per run (expected {expected}), {differing} differing, reports identical: {reports_equal}, {:.1} s for two runs (limit {} s)",
        fa.len(),
        elapsed.as_secs_f64(),
        DETERMINISM_BUDGET.as_secs()
    );
    (Verdict { name: "determinism", pass, detail }, a)
}

fn by_agent<'a>(traces: &'a [EpisodeTrace], agent: &str) -> impl Iterator<Item = &'a EpisodeTrace> + 'a {
    let agent = agent.to_string();
    traces.iter().filter(move |t| t.header.agent == agent)
}

fn oracle_completeness(traces: &[EpisodeTrace]) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    for cat in [Category::ExplicitControl, Category::EnvironmentAlerts] {
        let ts: Vec<_> = by_agent(traces, "ASURADA+Scripted").filter(|t| t.header.instance.category == cat).collect();
        let templates: BTreeSet<_> = ts.iter().map(|t| &t.header.instance.template_id).collect();
        let wins = ts.iter().filter(|t| t.outcome.reward == 1).count();
        pass &= templates.len() >= 10 && !ts.is_empty() && wins == ts.len();
        parts.push(format!(
            "{}: {wins}/{} = {:.1} % over {} templates",
            cat.name(),
            ts.len(),
            100.0 * wins as f64 / ts.len().max(1) as f64,
            templates.len()
        ));
    }
    Verdict { name: "oracle completeness", pass, detail: parts.join("; ") }
}

fn ablation_flip(world: &World, traces: &[EpisodeTrace]) -> Verdict {
    let tmpl = world.suite.template("da_urban_overspeed").expect("paris template");
    let inst = world.suite.instantiate(tmpl, 0, world.kb.region("paris_urban").unwrap()).unwrap();
    let setup_ok = inst.gps.lat == PARIS.0
        && inst.gps.lon == PARIS.1
        && inst.init_overrides.get("motion.speed_kmh").and_then(Value::as_f64) == Some(PARIS_SPEED_KMH);
    let play = |v: Variant| {
        let mut agent = PipelineAgent::scripted(v, world.kb.clone(), world.layouts.clone());
        run_episode(&mut agent, &inst, v.modalities(), &world.kb, &world.layouts, None, &mut |_| {}).unwrap()
    };
    let with = play(Variant::ASURADA);
    let blind = play(Variant::M3A);
    let with_ok = with.outcome.reward == 1 && with.steps.iter().any(|s| s.action == Some(Action::api("open_safety_center")));
    let blind_ok = blind.outcome.reward == 0 && blind.steps.last().and_then(|s| s.action.clone()) == Some(Action::status(StatusKind::Infeasible));

    let rate = |agent: &str| {
        let ts: Vec<_> = by_agent(traces, agent)
            .filter(|t| t.header.instance.category == Category::DrivingAlignment && t.header.instance.geo_dependent)
            .collect();
        (ts.iter().filter(|t| t.outcome.reward == 1).count(), ts.len())
    };
    let (aw, an) = rate("ASURADA+Scripted");
    let (mw, mn) = rate("M3A+Scripted");
    let pass = setup_ok && with_ok && blind_ok && an > 0 && aw == an && mn == an && mw == 0;
    let detail = format!(
        "paris 80 km/h: ASURADA reward {} ({} steps), M3A reward {} via {:?}; geo-dependent DA: ASURADA {aw}/{an}, M3A {mw}/{mn}",
        with.outcome.reward,
        with.outcome.steps_used,
        blind.outcome.reward,
        blind.outcome.terminated_by
    );
    Verdict { name: "geo-context ablation", pass, detail }
}

/// Reads the canonical serialization back as plain JSON and decides each
/// check from its written definition.
fn brute_force(name: &str, state: &VehicleState, t: f64, v: i64) -> bool {
    let j: serde_json::Map<String, serde_json::Value> = serde_json::from_slice(&canonical_bytes(state)).unwrap();
    let b = |k: &str| j[k].as_bool().unwrap();
    let i = |k: &str| j[k].as_i64().unwrap();
    match name {
        "check_fan_speed_max" => i("hvac.fan_speed") == 6,
        "check_driver_seat_heater_enable" => i("hvac.seat_heater_driver") >= 1,
        "check_ac_auto" => j["hvac.ac_mode"] == "Auto",
        "check_media_play" => b("media.playing"),
        "check_front_defroster_enable" => b("hvac.defrost_front"),
        "check_rear_defroster_enable" | "check_raw_defroster_enable" => b("hvac.defrost_rear"),
        "check_screen_brightness" => i("system.screen_brightness") >= 70,
        "check_safety_center_open" => b("safety.notification_center_open"),
        "check_nav_destination_set" => !j["nav.destination"].is_null(),
        "check_temperature_setpoint" => j["hvac.setpoint_c"].as_f64().unwrap() == t,
        "check_volume_at_most" => i("media.volume") <= v,
        "check_fog_lights_on" => b("motion.fog_lights"),
        "check_high_beams_off" => !b("motion.high_beams"),
        other => panic!("no reference predicate for {other}"),
    }
}

fn validator_equivalence(world: &World) -> Verdict {
    let tmpl = world.suite.template("ec_fan_speed_max").unwrap();
    let base = world.suite.instantiate(tmpl, 0, Suite::region_for(tmpl, 0, &world.kb).unwrap()).unwrap();
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut disagreements = 0;
    let mut unexercised = Vec::new();
    for name in catalog::CHECKS {
        let mut truths = 0;
        for _ in 0..VALIDATOR_SAMPLES {
            let state = common::random_state(&mut rng);
            let t = 16.0 + 0.5 * rng.random_range(0..=28) as f64;
            let v = rng.random_range(0..=100i64);
            let conditions = catalog::expand(name, |p| match p {
                "t" => Some(Value::Float(t)),
                "v" => Some(Value::Int(v)),
                _ => None,
            })
            .expect("catalog check expands");
            let mut inst = base.clone();
            inst.validator = BoundValidator { check: Some(name.to_string()), conditions };
            let got = validate(&inst, &state);
            let want = brute_force(name, &state, t, v);
            disagreements += usize::from(got != want);
            truths += usize::from(want);
        }
        if truths == 0 || truths == VALIDATOR_SAMPLES {
            unexercised.push(name);
        }
    }
    let pass = disagreements == 0 && unexercised.is_empty();
    let detail = format!(
        "{} validators x {VALIDATOR_SAMPLES} states, {disagreements} disagreements, one-sided: {unexercised:?}",
        catalog::CHECKS.len()
    );
    Verdict { name: "validator equivalence", pass, detail }
}

fn som_grounding() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let mut failures = Vec::new();
    let mut pairs = 0;
    let mut taps = 0;
    for i in 0..SOM_STATES {
        let state = common::random_state(&mut rng);
        for screen in ScreenId::ALL {
            pairs += 1;
            let tree = build_ui_tree(&state, screen);
            let (_, map) = annotate_som(&tree, &render(&tree));
            let nodes = tree.interactables();
            let indices: Vec<u32> = nodes.iter().filter_map(|n| n.som_index).collect();
            let distinct: BTreeSet<u32> = indices.iter().copied().collect();
            let keys: BTreeSet<u32> = map.keys().copied().collect();
            if indices.len() != nodes.len() || distinct.len() != indices.len() || keys != distinct {
                failures.push(format!("state {i} {}: index map not bijective", screen.name()));
                continue;
            }
            for n in &nodes {
                let (x, y) = map[&n.som_index.unwrap()].center();
                taps += 1;
                if dispatch_tap(&tree, x, y) != Ok(node_effect(n, x)) {
                    failures.push(format!("state {i} {}: tap on {} missed", screen.name(), n.id));
                }
            }
        }
    }
    let detail = format!("{pairs} (state, screen) pairs, {taps} taps, {} failures {:?}", failures.len(), failures.iter().take(3).collect::<Vec<_>>());
    Verdict { name: "SoM grounding", pass: failures.is_empty(), detail }
}

fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    const R: f64 = 6_371_008.8;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * a.sqrt().asin()
}

fn geometry() -> Verdict {
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..GEOMETRY_SAMPLES {
        let fix = GeoFix::new(rng.random_range(-80.0..80.0), rng.random_range(-180.0..180.0), rng.random_range(0.0..360.0), 0);
        let speed = rng.random_range(0.0..=130.0);
        let dt = rng.random_range(1..=60);
        let next = advance_fix(&fix, speed, dt, &[]).unwrap();
        let expected = speed / 3.6 * dt as f64;
        let got = haversine_m(fix.lat, fix.lon, next.lat, next.lon);
        let err = if expected < 1e-9 { got } else { (got - expected).abs() / expected };
        worst = worst.max(err);
        failures += usize::from(err > GEOMETRY_TOLERANCE);
    }
    let detail = format!("{GEOMETRY_SAMPLES} samples, worst relative error {:.2e} (limit {GEOMETRY_TOLERANCE})", worst);
    Verdict { name: "geometry oracle", pass: failures == 0, detail }
}

fn mutate(trace: &EpisodeTrace, k: usize) -> EpisodeTrace {
    let mut t = trace.clone();
    let rec = &mut t.steps[k];
    match &rec.action {
        Some(Action::Wait) => rec.action = Some(Action::status(StatusKind::Infeasible)),
        Some(_) => rec.action = Some(Action::Wait),
        None => rec.raw_action.get_or_insert_with(String::new).push('x'),
    }
    t
}

fn replay_integrity(world: &World, dir: &Path) -> Verdict {
    let traces = TraceStore::new(dir).load_all().unwrap();
    let mut replay_failures = 0;
    let (mut mutations, mut detected) = (0, 0);
    for (_, t) in &traces {
        match replay(t, &world.kb, &world.layouts) {
            Ok(o) if o.reward == t.outcome.reward && o.steps_used == t.outcome.steps_used => {}
            _ => replay_failures += 1,
        }
        for k in 0..t.steps.len() {
            mutations += 1;
            if let Err(ReplayError::DigestMismatch { step }) = replay(&mutate(t, k), &world.kb, &world.layouts) {
                detected += usize::from(step as usize >= k);
            }
        }
    }
    let pass = !traces.is_empty() && replay_failures == 0 && detected == mutations;
    let detail = format!(
        "{}/{} traces replayed, {detected}/{mutations} single-action mutations detected",
        traces.len() - replay_failures,
        traces.len()
    );
    Verdict { name: "replay integrity", pass, detail }
}

fn dir_size(dir: &Path) -> u64 {
    let mut total = 0;
    for entry in fs::read_dir(dir).into_iter().flatten().flatten() {
        let meta = entry.metadata().unwrap();
        total += if meta.is_dir() { dir_size(&entry.path()) } else { meta.len() };
    }
    total
}

fn peak_rss_kb() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn footprint(traces: &Path) -> Verdict {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data");
    let disk = dir_size(&data) + dir_size(traces);
    let peak = peak_rss_kb();
    let pass = peak.is_some_and(|kb| kb < PEAK_MEMORY_LIMIT_KB) && disk < DISK_LIMIT_BYTES;
    let detail = format!(
        "peak RSS {} (limit 512 MB), bundled data + one run of traces {:.2} MB (limit 100 MB)",
        peak.map(|kb| format!("{:.1} MB", kb as f64 / 1024.0)).unwrap_or_else(|| "unavailable".into()),
        disk as f64 / (1024.0 * 1024.0)
    );
    Verdict { name: "scale/footprint", pass, detail }
}
