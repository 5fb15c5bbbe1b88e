//! Episode traces as JSON Lines: one header line, one line per step, one
//! outcome line. Step digests chain so that editing any recorded action or
//! observation is caught on replay.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Action, EngineError, Environment, ModalityConfig, Observation, ENGINE_VERSION};
use crate::geo::RegionKb;
use crate::gui::Layouts;
use crate::task::TaskInstance;
use crate::vehicle::snapshot_digest;
use crate::Digest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub engine_version: String,
    pub agent: String,
    pub instance: TaskInstance,
    pub config: ModalityConfig,
    pub max_steps: u32,
    pub seed: u64,
    #[serde(default)]
    pub kb_version: u32,
    /// Informational only; excluded from digests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    /// Digest of the observation the action was chosen from.
    pub obs_digest: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Action>,
    /// Verbatim agent output when it did not parse as an action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    #[serde(default)]
    pub reasoning_text: String,
    #[serde(default)]
    pub reasoning_token_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection_text: Option<String>,
    pub step_digest: Digest,
}

impl StepRecord {
    pub fn action_text(&self) -> String {
        match (&self.action, &self.raw_action) {
            (Some(a), _) => a.canonical(),
            (None, Some(raw)) => raw.clone(),
            (None, None) => String::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminatedBy {
    StatusComplete,
    StatusInfeasible,
    MaxSteps,
    AgentFailure,
    Timeout,
    /// The client ended the session before the episode finished.
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub reward: u8,
    pub steps_used: u32,
    pub terminated_by: TerminatedBy,
    pub final_obs_digest: Digest,
    pub final_state_digest: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceLine {
    Header(TraceHeader),
    Step(StepRecord),
    Outcome(Outcome),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TraceParseError {
    #[error("line {line}: {msg}")]
    BadLine { line: usize, msg: String },
    #[error("trace has no header")]
    MissingHeader,
    #[error("trace has no outcome")]
    MissingOutcome,
}

/// First link of the step digest chain.
pub fn chain_seed(header: &TraceHeader) -> Digest {
    let inst = serde_json::to_string(&header.instance).unwrap_or_default();
    let cfg = serde_json::to_string(&header.config).unwrap_or_default();
    Digest::of_parts(&[
        header.engine_version.as_bytes(),
        inst.as_bytes(),
        cfg.as_bytes(),
        &header.max_steps.to_le_bytes(),
    ])
}

/// `H(prev || obs_digest || action)`.
pub fn chain_step(prev: &Digest, obs_digest: &Digest, action: &str) -> Digest {
    Digest::of_parts(&[&prev.0, &obs_digest.0, action.as_bytes()])
}

impl EpisodeTrace {
    pub fn lines(&self) -> Vec<TraceLine> {
        let mut v = Vec::with_capacity(self.steps.len() + 2);
        v.push(TraceLine::Header(self.header.clone()));
        v.extend(self.steps.iter().cloned().map(TraceLine::Step));
        v.push(TraceLine::Outcome(self.outcome.clone()));
        v
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for l in self.lines() {
            out.push_str(&serde_json::to_string(&l).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceParseError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut outcome = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: TraceLine = serde_json::from_str(line)
                .map_err(|e| TraceParseError::BadLine { line: i + 1, msg: format!("{e}") })?;
            match parsed {
                TraceLine::Header(h) => header = Some(h),
                TraceLine::Step(s) => steps.push(s),
                TraceLine::Outcome(o) => outcome = Some(o),
            }
        }
        Ok(EpisodeTrace {
            header: header.ok_or(TraceParseError::MissingHeader)?,
            steps,
            outcome: outcome.ok_or(TraceParseError::MissingOutcome)?,
        })
    }

    /// Sum of reasoning tokens across steps.
    pub fn reasoning_tokens(&self) -> u64 {
        self.steps.iter().map(|s| s.reasoning_token_count as u64).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ReplayError {
    #[error("trace was produced by engine `{0}`")]
    VersionMismatch(String),
    #[error("digest mismatch at step {step}")]
    DigestMismatch { step: u32 },
    #[error("reward mismatch: recorded {recorded}, replayed {replayed}")]
    RewardMismatch { recorded: u8, replayed: u8 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayOutcome {
    pub reward: u8,
    pub steps_used: u32,
}

/// Re-executes the recorded actions and checks every digest.
pub fn replay(trace: &EpisodeTrace, kb: &RegionKb, layouts: &Layouts) -> Result<ReplayOutcome, ReplayError> {
    let h = &trace.header;
    if h.engine_version != ENGINE_VERSION {
        return Err(ReplayError::VersionMismatch(h.engine_version.clone()));
    }
    let (mut env, mut obs): (Environment, Observation) =
        Environment::reset(&h.instance, h.config, kb, layouts, Some(h.max_steps))?;
    if snapshot_digest(env.state()) != h.instance.initial_digest {
        return Err(ReplayError::DigestMismatch { step: 0 });
    }
    let mut prev = chain_seed(h);
    for (i, rec) in trace.steps.iter().enumerate() {
        let step = i as u32;
        let od = obs.digest();
        if rec.step != step || od != rec.obs_digest || env.is_done() {
            return Err(ReplayError::DigestMismatch { step });
        }
        prev = chain_step(&prev, &od, &rec.action_text());
        if prev != rec.step_digest {
            return Err(ReplayError::DigestMismatch { step });
        }
        let res = match &rec.action {
            Some(a) => env.step(a)?,
            None => env.step_invalid(rec.raw_action.as_deref().unwrap_or(""))?,
        };
        obs = res.observation;
    }
    let n = trace.steps.len() as u32;
    let o = &trace.outcome;
    if !env.is_done() {
        env.abort();
    }
    if obs.digest() != o.final_obs_digest || snapshot_digest(env.state()) != o.final_state_digest || o.steps_used != n {
        return Err(ReplayError::DigestMismatch { step: n });
    }
    let reward = env.reward().unwrap_or(0);
    if reward != o.reward {
        return Err(ReplayError::RewardMismatch { recorded: o.reward, replayed: reward });
    }
    Ok(ReplayOutcome { reward, steps_used: n })
}
