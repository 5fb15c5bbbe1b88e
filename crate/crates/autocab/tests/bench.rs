use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use autocab::bench::{aggregate, report_tokens, run_suite, token_report, BenchError, RunSpec, TokenStats};
use autocab::store::TraceStore;
use autocab::World;
use autocab_core::agents::{Backend, Variant};
use autocab_core::episode::{EpisodeTrace, TerminatedBy};
use proptest::prelude::*;

const SUBSET: [&str; 6] =
    ["ec_fan_speed_max", "ec_open_app", "ii_too_loud", "da_urban_overspeed", "da_front_window_foggy", "ea_extreme_heat"];

fn spec(jobs: usize) -> RunSpec {
    RunSpec {
        seeds: 2,
        jobs,
        templates: Some(SUBSET.iter().map(|s| s.to_string()).collect()),
        stamp_wall_clock: false,
        ..RunSpec::default()
    }
}

fn files(dir: &std::path::Path) -> BTreeMap<std::path::PathBuf, Vec<u8>> {
    TraceStore::new(dir).list().unwrap().into_iter().map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap())).collect()
}

#[test]
fn parallelism_does_not_change_results() {
    let w = World::bundled();
    for id in SUBSET {
        assert!(w.suite.template(id).is_some(), "{id}");
    }
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = run_suite(&w, &spec(1), Some(&TraceStore::new(a.path()))).unwrap();
    let many = run_suite(&w, &spec(3), Some(&TraceStore::new(b.path()))).unwrap();
    assert_eq!(one.report.to_json(), many.report.to_json());
    assert_eq!(files(a.path()), files(b.path()));
    assert_eq!(one.traces.len(), SUBSET.len() * 2 * 3);
    assert!(one.failures.is_empty());
    // canonical order: variant, template, seed
    let order: Vec<_> = one.traces.iter().take(3).map(|t| (t.header.agent.as_str(), t.header.instance.template_id.as_str(), t.header.seed)).collect();
    assert_eq!(order, [("T3A+Scripted", "ec_fan_speed_max", 0), ("T3A+Scripted", "ec_fan_speed_max", 1), ("T3A+Scripted", "ec_open_app", 0)]);

    // the same directory yields the same report
    let reloaded: Vec<EpisodeTrace> = TraceStore::new(a.path()).load_all().unwrap().into_iter().map(|(_, t)| t).collect();
    assert_eq!(aggregate(&reloaded, w.suite.suite_version).to_json(), one.report.to_json());
}

/// Recounts successes from the raw JSONL without the crate's types.
#[test]
fn report_matches_independent_recount() {
    let w = World::bundled();
    let dir = tempfile::tempdir().unwrap();
    let run = run_suite(&w, &spec(2), Some(&TraceStore::new(dir.path()))).unwrap();
    let mut counts: BTreeMap<(String, String), (u64, u64)> = BTreeMap::new();
    for path in TraceStore::new(dir.path()).list().unwrap() {
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        let header = lines.iter().find(|l| l["kind"] == "header").unwrap();
        let outcome = lines.iter().find(|l| l["kind"] == "outcome").unwrap();
        let agent = header["agent"].as_str().unwrap().to_string();
        let won = u64::from(outcome["reward"] == 1);
        for key in ["category", "functional_area"] {
            let e = counts.entry((agent.clone(), header["instance"][key].as_str().unwrap().to_string())).or_default();
            e.0 += 1;
            e.1 += won;
        }
    }
    let mut checked = 0;
    for c in &run.report.configs {
        for (name, rate) in c.categories.iter().chain(&c.functional_areas) {
            let (n, k) = counts.get(&(c.agent.clone(), name.clone())).copied().unwrap_or((0, 0));
            assert_eq!((rate.instances, rate.successes), (n, k), "{} {name}", c.agent);
            let expect = (n > 0).then(|| (1000.0 * k as f64 / n as f64).round() / 10.0);
            assert_eq!(rate.rate, expect);
            assert!(rate.successes <= rate.instances);
            checked += 1;
        }
    }
    assert_eq!(checked, 3 * 12);
    let asurada = run.report.configs.iter().find(|c| c.agent == "ASURADA+Scripted").unwrap();
    assert_eq!(asurada.overall.rate, Some(100.0));
    let m3a = run.report.configs.iter().find(|c| c.agent == "M3A+Scripted").unwrap();
    assert_eq!(m3a.categories["DrivingAlignment"].rate, Some(50.0));
    assert_eq!(m3a.categories["ExplicitControl"].rate, Some(100.0));
    let table = run.report.to_table();
    assert!(table.contains("ASURADA+Scripted") && table.contains("Phenomenon"));
}

fn with_counts(base: &EpisodeTrace, counts: &[u32]) -> EpisodeTrace {
    let mut t = base.clone();
    let template = t.steps[0].clone();
    t.steps = counts.iter().map(|&c| {
        let mut s = template.clone();
        s.reasoning_token_count = c;
        s
    }).collect();
    t
}

fn sample_trace() -> EpisodeTrace {
    let w = World::bundled();
    let s = RunSpec { seeds: 1, variants: vec![Variant::T3A], templates: Some(vec!["ec_fan_speed_max".into()]), ..RunSpec::default() };
    run_suite(&w, &s, None).unwrap().traces.remove(0)
}

#[test]
fn token_histogram_from_known_counts() {
    let base = sample_trace();
    let traces = [with_counts(&base, &[0, 249, 250]), with_counts(&base, &[2999, 3000, 10_000])];
    let r = token_report(&traces).unwrap();
    let stats = &r.per_agent["T3A+Scripted"];
    let mut bins = vec![0; 13];
    bins[0] = 2;
    bins[1] = 1;
    bins[11] = 1;
    bins[12] = 2;
    assert_eq!(stats.bins, bins);
    assert_eq!((stats.samples, stats.median, stats.p95, stats.max), (6, 250, 10_000, 10_000));

    let silent = token_report(&[with_counts(&base, &[0, 0, 0, 0])]).unwrap();
    let s = &silent.per_agent["T3A+Scripted"];
    assert_eq!(s.bins[0], 4);
    assert_eq!(s.bins.iter().sum::<u64>(), 4);
}

#[test]
fn empty_trace_set_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(report_tokens(dir.path()), Err(BenchError::EmptyTraceSet)));
    assert!(matches!(token_report(&[]), Err(BenchError::EmptyTraceSet)));
}

#[test]
fn bad_run_specs_are_rejected() {
    let w = World::bundled();
    let s = RunSpec { region: Some("atlantis".into()), ..spec(1) };
    assert!(matches!(run_suite(&w, &s, None), Err(BenchError::UnknownRegion(_))));
    let s = RunSpec { templates: Some(vec!["nope".into()]), ..spec(1) };
    assert!(matches!(run_suite(&w, &s, None), Err(BenchError::UnknownTemplate(_))));
    let s = RunSpec { backend: Backend::External, ..spec(1) };
    assert!(matches!(run_suite(&w, &s, None), Err(BenchError::NoEndpoint)));
}

#[test]
fn region_override_records_mismatches_as_failures() {
    let w = World::bundled();
    let s = RunSpec { region: Some("default".into()), seeds: 1, variants: vec![Variant::T3A], templates: Some(vec!["ec_fan_speed_max".into(), "da_urban_overspeed".into()]), ..RunSpec::default() };
    let run = run_suite(&w, &s, None).unwrap();
    assert_eq!(run.traces.len(), 1);
    assert_eq!(run.failures.len(), 1);
    assert_eq!(run.failures[0].job.template_id, "da_urban_overspeed");
}

/// Answers every decision with `reply`, or never answers when it is `None`.
fn fake_policy(reply: Option<&'static str>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let reader = BufReader::new(stream.try_clone().unwrap());
            for line in reader.lines() {
                let req: serde_json::Value = serde_json::from_str(&line.unwrap()).unwrap();
                assert_eq!(req["type"], "decide");
                assert!(req["prompt"].as_str().unwrap().contains("### INSTRUCTION"));
                assert!(req["observation"]["obs_digest"].is_string());
                match reply {
                    Some(text) => writeln!(stream, "{}", serde_json::json!({ "text": text })).unwrap(),
                    None => thread::sleep(Duration::from_secs(5)),
                }
            }
        }
    });
    addr
}

fn external(endpoint: String, timeout: Duration) -> RunSpec {
    RunSpec {
        backend: Backend::External,
        endpoint: Some(endpoint),
        step_timeout: timeout,
        seeds: 1,
        variants: vec![Variant::T3A],
        templates: Some(vec!["ec_fan_speed_max".into()]),
        ..RunSpec::default()
    }
}

#[test]
fn external_backend_round_trip() {
    let text = r#"Thinking it over. {"reasoning": "nothing here can be done safely", "action": {"type": "status", "value": "infeasible"}}"#;
    let run = run_suite(&World::bundled(), &external(fake_policy(Some(text)), Duration::from_secs(10)), None).unwrap();
    let t = &run.traces[0];
    assert_eq!(t.header.agent, "T3A+External");
    assert_eq!(t.outcome.terminated_by, TerminatedBy::StatusInfeasible);
    assert_eq!(t.outcome.steps_used, 1);
    assert_eq!(t.steps[0].reasoning_token_count, 6);
    assert_eq!(run.report.configs[0].tokens, TokenStats::from_counts(&[6]));
}

#[test]
fn silent_external_policy_is_an_agent_failure() {
    let run = run_suite(&World::bundled(), &external(fake_policy(None), Duration::from_millis(200)), None).unwrap();
    let t = &run.traces[0];
    assert_eq!(t.outcome.terminated_by, TerminatedBy::AgentFailure);
    assert_eq!(t.outcome.reward, 0);
    assert!(t.outcome.detail.is_some());
}

#[test]
fn unreachable_endpoint_is_an_agent_failure() {
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().to_string()
    };
    let run = run_suite(&World::bundled(), &external(addr, Duration::from_secs(1)), None).unwrap();
    assert_eq!(run.traces[0].outcome.terminated_by, TerminatedBy::AgentFailure);
}

proptest! {
    #[test]
    fn order_statistics_are_bounded(counts in proptest::collection::vec(0u32..5000, 1..200)) {
        let s = TokenStats::from_counts(&counts);
        prop_assert!(s.median <= s.p95);
        prop_assert!(s.p95 <= s.max);
        prop_assert_eq!(s.max, *counts.iter().max().unwrap());
        prop_assert_eq!(s.bins.iter().sum::<u64>(), counts.len() as u64);
        prop_assert!(counts.contains(&s.p95) && counts.contains(&s.median));
    }
}
