use autocab_core::agents::{PipelineAgent, Variant};
use autocab_core::assets;
use autocab_core::episode::run_episode;
use autocab_core::task::{Category, Suite};

fn reward(variant: Variant, template: &str, seed: u64) -> u8 {
    let suite = assets::suite();
    let kb = assets::regions();
    let layouts = assets::layouts();
    let t = suite.template(template).unwrap();
    let inst = suite.instantiate(t, seed, Suite::region_for(t, seed, &kb).unwrap()).unwrap();
    let mut agent = PipelineAgent::scripted(variant, kb.clone(), layouts.clone());
    let trace = run_episode(&mut agent, &inst, variant.modalities(), &kb, &layouts, None, &mut |_| {}).unwrap();
    trace.outcome.reward
}

#[test]
fn oracle_solves_every_template() {
    let suite = assets::suite();
    let mut failures = Vec::new();
    for t in &suite.templates {
        for seed in 0..5 {
            if reward(Variant::ASURADA, &t.template_id, seed) != 1 {
                failures.push((t.template_id.clone(), seed));
            }
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn geo_blind_fails_exactly_the_geo_dependent_tasks() {
    let suite = assets::suite();
    for t in &suite.templates {
        for seed in 0..5 {
            let r = reward(Variant::M3A, &t.template_id, seed);
            let expected = if t.geo_dependent { 0 } else { 1 };
            assert_eq!(r, expected, "{} seed {seed}", t.template_id);
            if t.geo_dependent {
                assert_eq!(t.category, Category::DrivingAlignment);
            }
        }
    }
}

#[test]
fn text_only_matches_multimodal_outcomes() {
    let suite = assets::suite();
    for t in suite.templates.iter().step_by(3) {
        assert_eq!(reward(Variant::T3A, &t.template_id, 2), reward(Variant::M3A, &t.template_id, 2), "{}", t.template_id);
    }
}
