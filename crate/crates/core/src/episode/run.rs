use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use super::trace::{chain_seed, chain_step};
use super::{
    Action, EngineError, Environment, EpisodeTrace, ModalityConfig, Observation, Outcome, StatusKind, StepRecord,
    StepResult, TerminatedBy, TraceHeader, TraceLine, ENGINE_VERSION,
};
use crate::Digest;
use crate::geo::RegionKb;
use crate::gui::Layouts;
use crate::task::TaskInstance;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("agent failure: {0}")]
pub struct AgentError(pub String);

/// One decision. `action` is `Err(raw)` when the agent produced something
/// that is not a valid action; the step is still consumed.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentOutput {
    pub action: Result<Action, String>,
    pub reasoning: String,
}

impl AgentOutput {
    pub fn act(action: Action) -> Self {
        AgentOutput { action: Ok(action), reasoning: String::new() }
    }
}

pub trait Agent {
    fn name(&self) -> String;

    /// Called once before the first observation.
    fn begin(&mut self, _inst: &TaskInstance) {}

    fn act(&mut self, obs: &Observation) -> Result<AgentOutput, AgentError>;

    /// Called after each step with the observations on both sides of it.
    fn reflect(&mut self, _before: &Observation, _action: Option<&Action>, _after: &Observation) -> Option<String> {
        None
    }
}

pub fn count_tokens(text: &str) -> u32 {
    text.split_whitespace().count() as u32
}

/// Sees the observations on both sides of a step; returns reflection text.
pub type ReflectFn<'a> = dyn FnMut(&Observation, Option<&Action>, &Observation) -> Option<String> + 'a;

/// Records one episode driven from outside: by [`run_episode`] or by a
/// remote client over the session protocol.
pub struct Recorder {
    env: Environment,
    header: TraceHeader,
    prev: Digest,
    steps: Vec<StepRecord>,
    obs: Observation,
}

impl Recorder {
    pub fn start(
        agent: &str,
        inst: &TaskInstance,
        config: ModalityConfig,
        kb: &RegionKb,
        layouts: &Layouts,
        max_steps: Option<u32>,
    ) -> Result<Self, EngineError> {
        let (env, obs) = Environment::reset(inst, config, kb, layouts, max_steps)?;
        let header = TraceHeader {
            engine_version: ENGINE_VERSION.to_string(),
            agent: agent.to_string(),
            instance: inst.clone(),
            config,
            max_steps: env.max_steps(),
            seed: inst.seed,
            kb_version: kb.kb_version,
            wall_clock: None,
        };
        let prev = chain_seed(&header);
        Ok(Recorder { env, header, prev, steps: Vec::new(), obs })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn observation(&self) -> &Observation {
        &self.obs
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn is_done(&self) -> bool {
        self.env.is_done()
    }

    /// Executes one agent output. `reflect` sees the observations on both
    /// sides of the step.
    pub fn step(
        &mut self,
        action: Result<Action, String>,
        reasoning: String,
        reflect: &mut ReflectFn<'_>,
    ) -> Result<(StepRecord, StepResult), EngineError> {
        let od = self.obs.digest();
        let (action, raw_action, res) = match action {
            Ok(a) => {
                let r = self.env.step(&a)?;
                (Some(a), None, r)
            }
            Err(raw) => {
                let r = self.env.step_invalid(&raw)?;
                (None, Some(raw), r)
            }
        };
        let reflection_text = reflect(&self.obs, action.as_ref(), &res.observation);
        let mut rec = StepRecord {
            step: self.steps.len() as u32,
            obs_digest: od,
            action,
            raw_action,
            event: res.invalid.clone(),
            reasoning_token_count: count_tokens(&reasoning),
            reasoning_text: reasoning,
            reflection_text,
            step_digest: self.prev,
        };
        self.prev = chain_step(&self.prev, &od, &rec.action_text());
        rec.step_digest = self.prev;
        self.steps.push(rec.clone());
        self.obs = res.observation.clone();
        Ok((rec, res))
    }

    /// Closes the episode. `stop` names why it ended early, if it did.
    pub fn finish(mut self, stop: Option<(TerminatedBy, String)>) -> EpisodeTrace {
        if !self.env.is_done() {
            self.env.abort();
        }
        let terminated_by = match (&stop, self.env.last_status()) {
            (Some((t, _)), _) => *t,
            (None, Some(StatusKind::Complete)) => TerminatedBy::StatusComplete,
            (None, Some(StatusKind::Infeasible)) => TerminatedBy::StatusInfeasible,
            (None, None) => TerminatedBy::MaxSteps,
        };
        let outcome = Outcome {
            reward: self.env.reward().unwrap_or(0),
            steps_used: self.env.steps_used(),
            terminated_by,
            final_obs_digest: self.obs.digest(),
            final_state_digest: self.env.state_digest(),
            detail: stop.map(|(_, d)| d),
        };
        EpisodeTrace { header: self.header, steps: self.steps, outcome }
    }
}

/// Drives `agent` through one episode. Every trace line is handed to `sink`
/// as soon as it exists so callers can persist partial traces.
pub fn run_episode(
    agent: &mut dyn Agent,
    inst: &TaskInstance,
    config: ModalityConfig,
    kb: &RegionKb,
    layouts: &Layouts,
    max_steps: Option<u32>,
    sink: &mut dyn FnMut(&TraceLine),
) -> Result<EpisodeTrace, EngineError> {
    let mut rec = Recorder::start(&agent.name(), inst, config, kb, layouts, max_steps)?;
    sink(&TraceLine::Header(rec.header().clone()));
    agent.begin(inst);
    let mut stop = None;
    while !rec.is_done() {
        let out = match agent.act(rec.observation()) {
            Ok(o) => o,
            Err(e) => {
                stop = Some((TerminatedBy::AgentFailure, e.0));
                break;
            }
        };
        let (record, _) = rec.step(out.action, out.reasoning, &mut |a, b, c| agent.reflect(a, b, c))?;
        sink(&TraceLine::Step(record));
    }
    let trace = rec.finish(stop);
    sink(&TraceLine::Outcome(trace.outcome.clone()));
    Ok(trace)
}
