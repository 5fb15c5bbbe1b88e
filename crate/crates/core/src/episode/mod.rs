//! Episode lifecycle: reset, step, observation assembly, traces and replay.

mod run;
mod trace;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{BBox, GeoFix, GpsTrack, RegionKb};
use crate::gui::{
    annotate_som, build_ui_tree_paged, dispatch_swipe, dispatch_tap, dispatch_text, render, GuiEffect, Layouts,
    PixelBuffer, ScreenId, SomMap, UiTree,
};
use crate::task::{initialize_episode, validate, TaskError, TaskInstance};
use crate::vehicle::{apply_control, snapshot_digest, tick, ScenarioScript, Value, VehicleState};
use crate::Digest;

pub use run::{count_tokens, run_episode, Agent, AgentError, AgentOutput, Recorder};
pub use trace::{
    chain_seed, chain_step, replay, TraceParseError, EpisodeTrace, Outcome, ReplayError, ReplayOutcome, StepRecord, TerminatedBy, TraceHeader, TraceLine,
};

/// Identifies the engine semantics traces were produced under.
pub const ENGINE_VERSION: &str = "autocab-engine/1";

/// Simulated seconds per step.
pub const STEP_DT_S: i64 = 1;

pub const SAFETY_APIS: [&str; 2] = ["raise_safety_alert", "open_safety_center"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkStatus {
    Online,
    Offline,
}

/// Which observation channels the agent receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityConfig {
    pub a11y: bool,
    pub screen: bool,
    /// Adds the SoM-annotated screen and index map; implies `screen`.
    pub som: bool,
    pub gps: bool,
    #[serde(default = "online")]
    pub network: NetworkStatus,
}

fn online() -> NetworkStatus {
    NetworkStatus::Online
}

impl Default for ModalityConfig {
    fn default() -> Self {
        ModalityConfig { a11y: true, screen: false, som: false, gps: true, network: NetworkStatus::Online }
    }
}

impl ModalityConfig {
    /// Parses a comma list such as `a11y,screen,som,gps`.
    pub fn from_list(list: &str) -> Result<Self, String> {
        let mut c = ModalityConfig { a11y: false, screen: false, som: false, gps: false, network: NetworkStatus::Online };
        for m in list.split(',').map(str::trim).filter(|m| !m.is_empty()) {
            match m {
                "a11y" => c.a11y = true,
                "screen" => c.screen = true,
                "som" => {
                    c.screen = true;
                    c.som = true
                }
                "gps" => c.gps = true,
                other => return Err(format!("unknown modality `{other}`")),
            }
        }
        Ok(c)
    }

    pub fn to_list(&self) -> String {
        let mut v = Vec::new();
        if self.a11y {
            v.push("a11y");
        }
        if self.screen && !self.som {
            v.push("screen");
        }
        if self.som {
            v.push("som");
        }
        if self.gps {
            v.push("gps");
        }
        v.join(",")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatusKind {
    Complete,
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TapTarget {
    Index { som_index: u32 },
    Point { x: i32, y: i32 },
}

/// Agent action. JSON form is tagged by `type`, e.g.
/// `{"type": "Tap", "som_index": 4}` or `{"type": "Status", "status": "Complete"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Action {
    Tap {
        #[serde(flatten)]
        target: TapTarget,
    },
    Swipe {
        from: [i32; 2],
        to: [i32; 2],
    },
    InputText {
        som_index: u32,
        text: String,
    },
    ApiCall {
        name: String,
        #[serde(default)]
        args: BTreeMap<String, Value>,
    },
    Status {
        status: StatusKind,
    },
    Wait,
}

impl Action {
    pub fn tap_index(som_index: u32) -> Self {
        Action::Tap { target: TapTarget::Index { som_index } }
    }

    pub fn api(name: &str) -> Self {
        Action::ApiCall { name: name.to_string(), args: BTreeMap::new() }
    }

    pub fn status(status: StatusKind) -> Self {
        Action::Status { status }
    }

    /// Canonical JSON used in step digests.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// What the agent sees at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub step_index: u32,
    pub instruction: String,
    pub current_screen: ScreenId,
    pub a11y: Option<UiTree>,
    pub screen: Option<PixelBuffer>,
    pub som_screen: Option<PixelBuffer>,
    pub som_map: Option<SomMap>,
    pub gps: Option<GeoFix>,
    /// `motion.*`, `phenomenon.*`, plus `road.*` when GPS is available.
    pub signals: BTreeMap<String, Value>,
    pub network: NetworkStatus,
    /// Set when the previous action was rejected.
    pub event: Option<String>,
}

impl Observation {
    pub fn digest(&self) -> Digest {
        let j = |v: &dyn erased::Json| v.json();
        let tree = self.a11y.as_ref().map(UiTree::canonical_json).unwrap_or_default();
        let screen = self.screen.as_ref().map(|b| b.digest().to_hex()).unwrap_or_default();
        let som = self.som_screen.as_ref().map(|b| b.digest().to_hex()).unwrap_or_default();
        Digest::of_parts(&[
            &self.step_index.to_le_bytes(),
            self.instruction.as_bytes(),
            self.current_screen.name().as_bytes(),
            tree.as_bytes(),
            screen.as_bytes(),
            som.as_bytes(),
            j(&self.som_map).as_bytes(),
            j(&self.gps).as_bytes(),
            j(&self.signals).as_bytes(),
            j(&self.network).as_bytes(),
            j(&self.event).as_bytes(),
        ])
    }
}

mod erased {
    use alloc::string::String;

    pub trait Json {
        fn json(&self) -> String;
    }

    impl<T: serde::Serialize> Json for T {
        fn json(&self) -> String {
            serde_json::to_string(self).unwrap_or_default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EngineError {
    #[error("session is not active")]
    SessionInactive,
    #[error(transparent)]
    Init(#[from] TaskError),
}

/// Result of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub done: bool,
    /// Present once `done`.
    pub reward: Option<u8>,
    /// Why the action was rejected, if it was.
    pub invalid: Option<String>,
}

/// One isolated episode. Owns its state; shares nothing mutable.
#[derive(Clone, Debug)]
pub struct Environment {
    inst: TaskInstance,
    config: ModalityConfig,
    layouts: Layouts,
    outage_zones: Vec<BBox>,
    script: ScenarioScript,
    state: VehicleState,
    track: GpsTrack,
    screen: ScreenId,
    page: u32,
    step_index: u32,
    max_steps: u32,
    done: bool,
    reward: Option<u8>,
    last_status: Option<StatusKind>,
}

impl Environment {
    /// Initializes the instance and positions the session at step 0.
    pub fn reset(
        inst: &TaskInstance,
        config: ModalityConfig,
        kb: &RegionKb,
        layouts: &Layouts,
        max_steps: Option<u32>,
    ) -> Result<(Environment, Observation), EngineError> {
        let start = initialize_episode(inst, kb)?;
        let env = Environment {
            inst: inst.clone(),
            config,
            layouts: layouts.clone(),
            outage_zones: start.outage_zones,
            script: start.script,
            state: start.state,
            track: start.track,
            screen: ScreenId::Home,
            page: 0,
            step_index: 0,
            max_steps: max_steps.unwrap_or(inst.max_steps).max(1),
            done: false,
            reward: None,
            last_status: None,
        };
        let obs = env.observe(None);
        Ok((env, obs))
    }

    pub fn instance(&self) -> &TaskInstance {
        &self.inst
    }

    pub fn config(&self) -> ModalityConfig {
        self.config
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn track(&self) -> &GpsTrack {
        &self.track
    }

    pub fn current_screen(&self) -> ScreenId {
        self.screen
    }

    pub fn page(&self) -> u32 {
        self.page
    }

    pub fn steps_used(&self) -> u32 {
        self.step_index
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn reward(&self) -> Option<u8> {
        self.reward
    }

    pub fn last_status(&self) -> Option<StatusKind> {
        self.last_status
    }

    pub fn layouts(&self) -> &Layouts {
        &self.layouts
    }

    /// Tree of the current screen and page.
    pub fn tree(&self) -> UiTree {
        build_ui_tree_paged(&self.layouts, &self.state, self.screen, self.page)
    }

    fn observe(&self, event: Option<String>) -> Observation {
        let tree = self.tree();
        let (screen, som_screen, som_map) = if self.config.screen || self.config.som {
            let buf = render(&tree);
            if self.config.som {
                let (annotated, map) = annotate_som(&tree, &buf);
                (Some(buf), Some(annotated), Some(map))
            } else {
                (Some(buf), None, None)
            }
        } else {
            (None, None, None)
        };
        let signals = crate::vehicle::SIGNALS
            .iter()
            .filter(|s| {
                s.path.starts_with("motion.")
                    || s.path.starts_with("phenomenon.")
                    || (self.config.gps && s.path.starts_with("road."))
            })
            .filter_map(|s| Some((s.path.to_string(), self.state.get(s.path)?)))
            .collect();
        Observation {
            step_index: self.step_index,
            instruction: self.inst.instruction.clone(),
            current_screen: self.screen,
            a11y: self.config.a11y.then_some(tree),
            screen,
            som_screen,
            som_map,
            gps: self.config.gps.then_some(self.track.reported),
            signals,
            network: self.config.network,
            event,
        }
    }

    fn navigate(&mut self, to: ScreenId) {
        self.screen = to;
        self.page = 0;
        self.state.safety.notification_center_open = to == ScreenId::SafetyCenter;
    }

    fn apply_effect(&mut self, effect: GuiEffect) -> Result<(), String> {
        match effect {
            GuiEffect::Command { command } => {
                self.state = apply_control(&self.state, &command).map_err(|e| format!("{e}"))?;
            }
            GuiEffect::NavigateTo { screen } => self.navigate(screen),
            GuiEffect::Scroll { page, .. } => self.page = page,
            GuiEffect::NoOp => {}
        }
        Ok(())
    }

    fn execute(&mut self, action: &Action) -> Result<(), String> {
        let tree = self.tree();
        match action {
            Action::Tap { target } => {
                let (x, y) = match *target {
                    TapTarget::Index { som_index } => tree
                        .by_som_index(som_index)
                        .map(|n| n.bounds.center())
                        .ok_or_else(|| format!("no element with index {som_index}"))?,
                    TapTarget::Point { x, y } => (x, y),
                };
                let effect = dispatch_tap(&tree, x, y).map_err(|e| format!("{e}"))?;
                self.apply_effect(effect)
            }
            Action::Swipe { from, to } => {
                let effect = dispatch_swipe(&tree, (from[0], from[1]), (to[0], to[1])).map_err(|e| format!("{e}"))?;
                self.apply_effect(effect)
            }
            Action::InputText { som_index, text } => {
                let effect = dispatch_text(&tree, *som_index, text).map_err(|e| format!("{e}"))?;
                self.apply_effect(effect)
            }
            Action::ApiCall { name, args } => match name.as_str() {
                "open_safety_center" => {
                    self.navigate(ScreenId::SafetyCenter);
                    Ok(())
                }
                "raise_safety_alert" => {
                    let msg = args
                        .get("message")
                        .and_then(Value::as_text)
                        .ok_or_else(|| String::from("raise_safety_alert needs a text `message`"))?;
                    self.state = self.state.raise_alert("agent", msg);
                    Ok(())
                }
                other => Err(format!("unknown api `{other}`")),
            },
            Action::Status { status } => {
                self.last_status = Some(*status);
                Ok(())
            }
            Action::Wait => Ok(()),
        }
    }

    fn advance(&mut self, finished: bool, event: Option<String>) -> StepResult {
        self.state = tick(&self.state, STEP_DT_S, &self.script).expect("dt is positive");
        self.track = self
            .track
            .advance(self.state.motion.speed_kmh, STEP_DT_S, &self.outage_zones)
            .expect("dt is positive");
        self.step_index += 1;
        if finished || self.step_index >= self.max_steps {
            self.done = true;
            self.reward = Some(validate(&self.inst, &self.state) as u8);
        }
        StepResult { observation: self.observe(event.clone()), done: self.done, reward: self.reward, invalid: event }
    }

    /// Executes one action and advances simulated time by one second.
    pub fn step(&mut self, action: &Action) -> Result<StepResult, EngineError> {
        if self.done {
            return Err(EngineError::SessionInactive);
        }
        let before = (self.state.clone(), self.screen, self.page);
        match self.execute(action) {
            Ok(()) => Ok(self.advance(matches!(action, Action::Status { .. }), None)),
            Err(reason) => {
                (self.state, self.screen, self.page) = before;
                Ok(self.advance(false, Some(format!("invalid_action: {reason}"))))
            }
        }
    }

    /// Consumes a step for an action that could not be parsed.
    pub fn step_invalid(&mut self, reason: &str) -> Result<StepResult, EngineError> {
        if self.done {
            return Err(EngineError::SessionInactive);
        }
        Ok(self.advance(false, Some(format!("invalid_action: {reason}"))))
    }

    /// Ends the episode early without a status (timeouts, agent failures).
    pub fn abort(&mut self) {
        self.done = true;
        self.reward = Some(0);
    }

    pub fn state_digest(&self) -> Digest {
        snapshot_digest(&self.state)
    }
}
