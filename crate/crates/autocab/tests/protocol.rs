use autocab::protocol::{ClientFrame, ModalityList, ObsFrame, ServerFrame};
use autocab::server::decode_action;
use autocab::World;
use autocab_core::episode::{Action, Environment, ModalityConfig, StatusKind, TapTarget};
use autocab_core::gui::{Behavior, ScreenId};
use autocab_core::task::Suite;
use proptest::prelude::*;
use serde_json::json;

fn full() -> ModalityConfig {
    ModalityConfig::from_list("a11y,screen,som,gps").unwrap()
}

#[test]
fn every_start_observation_survives_the_wire() {
    let w = World::bundled();
    for t in &w.suite.templates {
        let inst = w.suite.instantiate(t, 0, Suite::region_for(t, 0, &w.kb).unwrap()).unwrap();
        let (_, obs) = Environment::reset(&inst, full(), &w.kb, &w.layouts, None).unwrap();
        let line = ServerFrame::Obs(Box::new(ObsFrame::from_observation(&obs))).to_line();
        let ServerFrame::Obs(back) = serde_json::from_str(&line).unwrap() else { panic!() };
        assert_eq!(back.to_observation().unwrap(), obs, "{}", t.template_id);
    }
}

#[test]
fn every_screen_survives_the_wire() {
    let w = World::bundled();
    let t = w.suite.template("ec_open_app").unwrap();
    let inst = w.suite.instantiate(t, 0, Suite::region_for(t, 0, &w.kb).unwrap()).unwrap();
    for screen in ScreenId::ALL {
        let (mut env, obs) = Environment::reset(&inst, full(), &w.kb, &w.layouts, None).unwrap();
        let nav = obs.a11y.as_ref().unwrap().interactables().into_iter().find(|n| n.behavior == Some(Behavior::Navigate { screen }));
        let Some(nav) = nav else { continue };
        let obs = env.step(&Action::tap_index(nav.som_index.unwrap())).unwrap().observation;
        assert_eq!(obs.current_screen, screen);
        let frame: ObsFrame = serde_json::from_str(&serde_json::to_string(&ObsFrame::from_observation(&obs)).unwrap()).unwrap();
        assert_eq!(frame.to_observation().unwrap().digest(), obs.digest(), "{}", screen.name());
    }
}

#[test]
fn client_frames_parse() {
    let f: ClientFrame =
        serde_json::from_str(r#"{"type":"start","template_id":"ec_fan_speed_max","seed":3,"modalities":"a11y,gps"}"#).unwrap();
    let ClientFrame::Start { seed, modalities: Some(m), region: None, .. } = f else { panic!("{f:?}") };
    assert_eq!(seed, 3);
    assert_eq!(m.config().unwrap(), ModalityConfig::from_list("a11y,gps").unwrap());
    assert!(ModalityList::List(vec!["smell".into()]).config().is_err());
    let f: ClientFrame = serde_json::from_str(r#"{"type":"end"}"#).unwrap();
    assert_eq!(f, ClientFrame::End);
    assert!(serde_json::from_str::<ClientFrame>(r#"{"type":"start"}"#).is_err());
}

#[test]
fn actions_decode_strictly_then_leniently() {
    assert_eq!(decode_action(&json!({"type": "Wait"})), Ok(Action::Wait));
    assert_eq!(
        decode_action(&json!({"type": "tap", "index": 4})),
        Ok(Action::Tap { target: TapTarget::Index { som_index: 4 } })
    );
    assert_eq!(decode_action(&json!({"type": "status", "value": "complete"})), Ok(Action::status(StatusKind::Complete)));
    assert!(decode_action(&json!("tap the fan")).is_err());
    assert!(decode_action(&json!({"type": "Teleport"})).is_err());
}

proptest! {
    #[test]
    fn decode_action_is_total(text in ".{0,64}") {
        let _ = decode_action(&serde_json::Value::String(text.clone()));
        if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
            let _ = decode_action(&v);
        }
    }
}
