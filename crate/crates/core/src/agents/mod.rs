//! Reference agent pipelines: T3A (a11y text only), M3A (adds the SoM
//! screen), ASURADA (adds GPS, geo-context, reflection memory).

mod context;
mod memory;
mod oracle;
mod plan;
mod prompt;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::episode::{Action, Agent, AgentError, AgentOutput, ModalityConfig, NetworkStatus, Observation};
use crate::geo::RegionKb;
use crate::gui::Layouts;
use crate::task::TaskInstance;

pub use context::{geo_context_stage, GeoContext, CONTEXT_QUERIES};
pub use memory::{describe_action, diff, reflect, Change, MemoryEntry, MemoryStore, OutcomeTag, StepDiff};
pub use oracle::{geo_blind_policy, scripted_oracle_policy, OracleStuck};
pub use plan::{parse_action_plan, parse_action_plan_for, ActionPlan, PlanError};
pub use prompt::{
    build_prompt, serialize_tree, PromptError, PromptProfile, PromptProfiles, SECTION_CONTEXT, SECTION_GPS,
    SECTION_INSTRUCTION, SECTION_MEMORY, SECTION_RESPONSE, SECTION_SCREEN, SECTION_UI,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    T3A,
    M3A,
    ASURADA,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::T3A, Variant::M3A, Variant::ASURADA];

    pub fn name(self) -> &'static str {
        match self {
            Variant::T3A => "T3A",
            Variant::M3A => "M3A",
            Variant::ASURADA => "ASURADA",
        }
    }

    /// Observation channels the variant is allowed.
    pub fn modalities(self) -> ModalityConfig {
        let net = NetworkStatus::Online;
        match self {
            Variant::T3A => ModalityConfig { a11y: true, screen: false, som: false, gps: false, network: net },
            Variant::M3A => ModalityConfig { a11y: true, screen: true, som: true, gps: false, network: net },
            Variant::ASURADA => ModalityConfig { a11y: true, screen: true, som: true, gps: true, network: net },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown variant `{s}` (expected t3a, m3a or asurada)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Backend {
    Scripted,
    External,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Scripted => "Scripted",
            Backend::External => "External",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Backend::Scripted, Backend::External]
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown backend `{s}` (expected scripted or external)"))
    }
}

pub const DEFAULT_MEMORY_CAPACITY: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub variant: Variant,
    pub backend: Backend,
    pub prompt_profile: String,
    pub memory_capacity: usize,
}

impl AgentConfig {
    pub fn new(variant: Variant, backend: Backend) -> Self {
        AgentConfig { variant, backend, prompt_profile: "react".to_string(), memory_capacity: DEFAULT_MEMORY_CAPACITY }
    }

    pub fn label(&self) -> String {
        format!("{}+{}", self.variant, self.backend)
    }
}

/// What a policy sees each step.
pub struct PolicyRequest<'a> {
    pub variant: Variant,
    pub prompt: &'a str,
    pub observation: &'a Observation,
    pub context: Option<&'a GeoContext>,
}

/// Decision backend behind the pipeline. Answers with action-plan text.
pub trait Policy {
    fn begin(&mut self, _inst: &TaskInstance) {}

    fn decide(&mut self, req: &PolicyRequest<'_>) -> Result<String, AgentError>;

    /// Model-written reflection; `None` keeps the template summary.
    fn reflect(&mut self, _entry: &MemoryEntry, _diff: &StepDiff) -> Option<String> {
        None
    }
}

/// Oracle for ASURADA, geo-blind oracle for T3A and M3A.
pub struct ScriptedPolicy {
    layouts: Layouts,
    inst: Option<TaskInstance>,
}

impl ScriptedPolicy {
    pub fn new(layouts: Layouts) -> Self {
        ScriptedPolicy { layouts, inst: None }
    }
}

impl Policy for ScriptedPolicy {
    fn begin(&mut self, inst: &TaskInstance) {
        self.inst = Some(inst.clone());
    }

    fn decide(&mut self, req: &PolicyRequest<'_>) -> Result<String, AgentError> {
        let inst = self.inst.as_ref().ok_or_else(|| AgentError("policy used before begin".to_string()))?;
        let plan = match req.variant {
            Variant::ASURADA => scripted_oracle_policy(req.observation, inst, &self.layouts, req.context),
            Variant::T3A | Variant::M3A => geo_blind_policy(req.observation, inst, &self.layouts),
        }
        .map_err(|e| AgentError(format!("{e}")))?;
        Ok(plan.to_json())
    }
}

/// Prompt assembly, policy call, plan parsing and reflection around one
/// backend.
pub struct PipelineAgent {
    config: AgentConfig,
    profile: PromptProfile,
    kb: RegionKb,
    policy: Box<dyn Policy + Send>,
    memory: MemoryStore,
    instruction: String,
    last_prompt: String,
}

impl PipelineAgent {
    pub fn new(config: AgentConfig, kb: RegionKb, policy: Box<dyn Policy + Send>) -> Result<Self, String> {
        let profiles = crate::assets::prompt_profiles();
        let profile = profiles
            .get(&config.prompt_profile)
            .cloned()
            .ok_or_else(|| format!("unknown prompt profile `{}`", config.prompt_profile))?;
        let memory = MemoryStore::new(config.memory_capacity);
        Ok(PipelineAgent { config, profile, kb, policy, memory, instruction: String::new(), last_prompt: String::new() })
    }

    /// Scripted pipeline over the bundled layouts.
    pub fn scripted(variant: Variant, kb: RegionKb, layouts: Layouts) -> Self {
        Self::new(AgentConfig::new(variant, Backend::Scripted), kb, Box::new(ScriptedPolicy::new(layouts)))
            .expect("default profile is bundled")
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn last_prompt(&self) -> &str {
        &self.last_prompt
    }
}

impl Agent for PipelineAgent {
    fn name(&self) -> String {
        self.config.label()
    }

    fn begin(&mut self, inst: &TaskInstance) {
        self.memory = MemoryStore::new(self.config.memory_capacity);
        self.instruction = inst.instruction.clone();
        self.policy.begin(inst);
    }

    fn act(&mut self, obs: &Observation) -> Result<AgentOutput, AgentError> {
        let variant = self.config.variant;
        let context = match variant {
            Variant::ASURADA => geo_context_stage(obs, &self.kb),
            _ => None,
        };
        self.last_prompt = build_prompt(variant, &self.profile, obs, context.as_ref(), &self.memory, &self.instruction)
            .map_err(|e| AgentError(format!("{e}")))?;
        let req = PolicyRequest { variant, prompt: &self.last_prompt, observation: obs, context: context.as_ref() };
        let text = self.policy.decide(&req)?;
        Ok(match parse_action_plan_for(&text, obs) {
            Ok(plan) => AgentOutput { action: Ok(plan.action), reasoning: plan.reasoning },
            Err(_) => AgentOutput { action: Err(text), reasoning: String::new() },
        })
    }

    fn reflect(&mut self, before: &Observation, action: Option<&Action>, after: &Observation) -> Option<String> {
        let mut entry = reflect(before, action, after);
        if let Some(text) = self.policy.reflect(&entry, &diff(before, after)) {
            entry.summary = text;
        }
        let summary = entry.summary.clone();
        self.memory.push(entry);
        Some(summary)
    }
}
