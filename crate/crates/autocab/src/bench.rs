//! Suite runs and the reports built from their traces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use autocab_core::agents::{AgentConfig, Backend, PipelineAgent, Variant};
use autocab_core::episode::{run_episode, EpisodeTrace, TraceLine, ENGINE_VERSION};
use autocab_core::task::{Category, FunctionalArea, Suite};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::external::{ExternalPolicy, DEFAULT_STEP_TIMEOUT};
use crate::store::{wall_clock_now, StoreError, TraceStore};
use crate::World;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TOKEN_BIN_WIDTH: u32 = 250;
/// Twelve bins up to 3000 plus one open-ended bin.
pub const TOKEN_BINS: usize = 13;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("the external backend needs an endpoint")]
    NoEndpoint,
    #[error("no traces found")]
    EmptyTraceSet,
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub variants: Vec<Variant>,
    pub backend: Backend,
    /// Seeds `0..seeds`.
    pub seeds: u64,
    pub region: Option<String>,
    pub jobs: usize,
    pub max_steps: Option<u32>,
    pub endpoint: Option<String>,
    pub step_timeout: Duration,
    /// Restricts the run to these templates, in suite order.
    pub templates: Option<Vec<String>>,
    pub stamp_wall_clock: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            variants: Variant::ALL.to_vec(),
            backend: Backend::Scripted,
            seeds: 5,
            region: None,
            jobs: 1,
            max_steps: None,
            endpoint: None,
            step_timeout: DEFAULT_STEP_TIMEOUT,
            templates: None,
            stamp_wall_clock: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Job {
    pub variant: Variant,
    pub template_id: String,
    pub seed: u64,
}

/// An episode that produced no trace.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeFailure {
    pub job: Job,
    pub error: String,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: SuiteReport,
    /// In job order.
    pub traces: Vec<EpisodeTrace>,
    pub trace_paths: Vec<PathBuf>,
    pub failures: Vec<EpisodeFailure>,
}

/// Every episode of a run in canonical order: variant, template, seed.
pub fn plan_jobs(suite: &Suite, spec: &RunSpec) -> Result<Vec<Job>, BenchError> {
    let ids: Vec<&str> = match &spec.templates {
        Some(list) => {
            for id in list {
                suite.template(id).ok_or_else(|| BenchError::UnknownTemplate(id.clone()))?;
            }
            suite.templates.iter().map(|t| t.template_id.as_str()).filter(|id| list.iter().any(|l| l == id)).collect()
        }
        None => suite.templates.iter().map(|t| t.template_id.as_str()).collect(),
    };
    let mut jobs = Vec::new();
    for &variant in &spec.variants {
        for id in &ids {
            for seed in 0..spec.seeds {
                jobs.push(Job { variant, template_id: id.to_string(), seed });
            }
        }
    }
    Ok(jobs)
}

pub fn agent_label(variant: Variant, backend: Backend) -> String {
    AgentConfig::new(variant, backend).label()
}

fn run_job(world: &World, spec: &RunSpec, store: Option<&TraceStore>, job: &Job) -> Result<(EpisodeTrace, Option<PathBuf>), String> {
    let tmpl = world.suite.template(&job.template_id).ok_or("template vanished")?;
    let region = match &spec.region {
        Some(r) => world.kb.region(r).ok_or_else(|| format!("unknown region `{r}`"))?,
        None => Suite::region_for(tmpl, job.seed, &world.kb).map_err(|e| e.to_string())?,
    };
    let inst = world.suite.instantiate(tmpl, job.seed, region).map_err(|e| e.to_string())?;
    let mut agent = match spec.backend {
        Backend::Scripted => PipelineAgent::scripted(job.variant, world.kb.clone(), world.layouts.clone()),
        Backend::External => {
            let endpoint = spec.endpoint.clone().ok_or("no endpoint")?;
            let policy = ExternalPolicy::new(endpoint, spec.step_timeout);
            PipelineAgent::new(AgentConfig::new(job.variant, Backend::External), world.kb.clone(), Box::new(policy))?
        }
    };
    let label = agent_label(job.variant, spec.backend);
    let mut writer = match store {
        Some(s) => {
            let w = s.writer(&TraceStore::episode_name(&label, &job.template_id, job.seed)).map_err(|e| e.to_string())?;
            Some(if spec.stamp_wall_clock { w.with_wall_clock(wall_clock_now()) } else { w })
        }
        None => None,
    };
    let mut write_err = None;
    let result = run_episode(&mut agent, &inst, job.variant.modalities(), &world.kb, &world.layouts, spec.max_steps, &mut |line: &TraceLine| {
        if let (Some(w), None) = (writer.as_mut(), &write_err) {
            if let Err(e) = w.write_line(line) {
                write_err = Some(e.to_string());
            }
        }
    });
    match (result, write_err) {
        (Ok(trace), None) => {
            let path = writer.map(|w| w.commit()).transpose().map_err(|e| e.to_string())?;
            Ok((trace, path))
        }
        (Err(e), _) => {
            if let Some(w) = writer {
                w.discard();
            }
            Err(e.to_string())
        }
        (Ok(_), Some(e)) => {
            if let Some(w) = writer {
                w.discard();
            }
            Err(e)
        }
    }
}

/// Runs every job on `spec.jobs` worker threads. Results and the report
/// are merged in job order, so they do not depend on scheduling.
pub fn run_suite(world: &World, spec: &RunSpec, store: Option<&TraceStore>) -> Result<RunOutcome, BenchError> {
    if let Some(r) = &spec.region {
        world.kb.region(r).ok_or_else(|| BenchError::UnknownRegion(r.clone()))?;
    }
    if spec.backend == Backend::External && spec.endpoint.is_none() {
        return Err(BenchError::NoEndpoint);
    }
    if let Some(s) = store {
        s.cleanup_partials()?;
    }
    let jobs = plan_jobs(&world.suite, spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(|job| run_job(world, spec, store, job)).collect());

    let mut traces = Vec::new();
    let mut trace_paths = Vec::new();
    let mut failures = Vec::new();
    for (job, r) in jobs.into_iter().zip(results) {
        match r {
            Ok((t, p)) => {
                traces.push(t);
                trace_paths.extend(p);
            }
            Err(error) => failures.push(EpisodeFailure { job, error }),
        }
    }
    let report = aggregate(&traces, world.suite.suite_version);
    Ok(RunOutcome { report, traces, trace_paths, failures })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub instances: u64,
    pub successes: u64,
    /// Percent to one decimal; absent when there were no instances.
    pub rate: Option<f64>,
}

impl Rate {
    fn new(instances: u64, successes: u64) -> Self {
        let rate = (instances > 0).then(|| round1(100.0 * successes as f64 / instances as f64));
        Rate { instances, successes, rate }
    }
}

pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub bin_width: u32,
    /// `[0,250)`, `[250,500)`, ... `[2750,3000)`, `[3000,inf)`.
    pub bins: Vec<u64>,
    pub samples: u64,
    pub median: u32,
    pub p95: u32,
    pub max: u32,
}

/// `p`-th percentile by nearest rank over sorted values.
pub fn nearest_rank(sorted: &[u32], p: f64) -> u32 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl TokenStats {
    pub fn from_counts(counts: &[u32]) -> Self {
        let mut bins = vec![0u64; TOKEN_BINS];
        for &c in counts {
            bins[((c / TOKEN_BIN_WIDTH) as usize).min(TOKEN_BINS - 1)] += 1;
        }
        let mut sorted = counts.to_vec();
        sorted.sort_unstable();
        TokenStats {
            bin_width: TOKEN_BIN_WIDTH,
            bins,
            samples: counts.len() as u64,
            median: nearest_rank(&sorted, 50.0),
            p95: nearest_rank(&sorted, 95.0),
            max: sorted.last().copied().unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    /// `<variant>+<backend>`, as recorded in trace headers.
    pub agent: String,
    pub overall: Rate,
    pub categories: BTreeMap<String, Rate>,
    pub functional_areas: BTreeMap<String, Rate>,
    /// Reasoning tokens per step.
    pub tokens: TokenStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub engine_version: String,
    pub suite_version: u32,
    pub kb_version: u32,
    pub seeds: Vec<u64>,
    pub configs: Vec<ConfigReport>,
}

fn label_order(label: &str) -> (usize, String) {
    let variant = label.split('+').next().and_then(|v| v.parse::<Variant>().ok());
    (variant.map(|v| v as usize).unwrap_or(usize::MAX), label.to_string())
}

/// Success rates and token statistics per agent configuration. Depends
/// only on the set of traces, not their order.
pub fn aggregate(traces: &[EpisodeTrace], suite_version: u32) -> SuiteReport {
    let mut by_agent: BTreeMap<(usize, String), Vec<&EpisodeTrace>> = BTreeMap::new();
    for t in traces {
        by_agent.entry(label_order(&t.header.agent)).or_default().push(t);
    }
    let configs = by_agent
        .into_iter()
        .map(|((_, agent), ts)| {
            let count = |keep: &dyn Fn(&EpisodeTrace) -> bool| {
                let hits: Vec<_> = ts.iter().filter(|t| keep(t)).collect();
                Rate::new(hits.len() as u64, hits.iter().filter(|t| t.outcome.reward == 1).count() as u64)
            };
            let categories = Category::ALL
                .iter()
                .map(|&c| (c.name().to_string(), count(&|t| t.header.instance.category == c)))
                .collect();
            let functional_areas = FunctionalArea::ALL
                .iter()
                .map(|&a| (a.name().to_string(), count(&|t| t.header.instance.functional_area == a)))
                .collect();
            let tokens: Vec<u32> = ts.iter().flat_map(|t| t.steps.iter().map(|s| s.reasoning_token_count)).collect();
            ConfigReport { agent, overall: count(&|_| true), categories, functional_areas, tokens: TokenStats::from_counts(&tokens) }
        })
        .collect();
    let seeds: BTreeSet<u64> = traces.iter().map(|t| t.header.seed).collect();
    SuiteReport {
        schema_version: REPORT_SCHEMA_VERSION,
        engine_version: ENGINE_VERSION.to_string(),
        suite_version,
        kb_version: traces.iter().map(|t| t.header.kb_version).max().unwrap_or(0),
        seeds: seeds.into_iter().collect(),
        configs,
    }
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Success-rate tables by category and by functional area.
    pub fn to_table(&self) -> String {
        let show = |r: Option<&Rate>| match r.and_then(|r| r.rate) {
            Some(x) => format!("{x:>7.1}"),
            None => format!("{:>7}", "-"),
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "engine {}  suite v{}  kb v{}  seeds {}",
            self.engine_version,
            self.suite_version,
            self.kb_version,
            self.seeds.len()
        );
        let _ = writeln!(out, "\n{:<20} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}", "SR %", "EC", "II", "DA", "EA", "all", "n");
        for c in &self.configs {
            let _ = write!(out, "{:<20}", c.agent);
            for cat in Category::ALL {
                let _ = write!(out, " {}", show(c.categories.get(cat.name())));
            }
            let _ = writeln!(out, " {} {:>6}", show(Some(&c.overall)), c.overall.instances);
        }
        let _ = write!(out, "\n{:<20}", "SR % by area");
        for a in FunctionalArea::ALL {
            let _ = write!(out, " {:>10}", a.name());
        }
        out.push('\n');
        for c in &self.configs {
            let _ = write!(out, "{:<20}", c.agent);
            for a in FunctionalArea::ALL {
                let _ = write!(out, " {:>10}", show(c.functional_areas.get(a.name())).trim());
            }
            out.push('\n');
        }
        let _ = writeln!(out, "\n{:<20} {:>8} {:>8} {:>8} {:>8}", "reasoning tokens", "steps", "median", "p95", "max");
        for c in &self.configs {
            let t = &c.tokens;
            let _ = writeln!(out, "{:<20} {:>8} {:>8} {:>8} {:>8}", c.agent, t.samples, t.median, t.p95, t.max);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenReport {
    pub per_agent: BTreeMap<String, TokenStats>,
}

pub fn token_report(traces: &[EpisodeTrace]) -> Result<TokenReport, BenchError> {
    if traces.is_empty() {
        return Err(BenchError::EmptyTraceSet);
    }
    let mut counts: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for t in traces {
        counts.entry(t.header.agent.clone()).or_default().extend(t.steps.iter().map(|s| s.reasoning_token_count));
    }
    Ok(TokenReport { per_agent: counts.into_iter().map(|(k, v)| (k, TokenStats::from_counts(&v))).collect() })
}

/// Token histogram and summary statistics of every trace under `dir`.
pub fn report_tokens(dir: &Path) -> Result<TokenReport, BenchError> {
    let traces: Vec<EpisodeTrace> = TraceStore::new(dir).load_all()?.into_iter().map(|(_, t)| t).collect();
    token_report(&traces)
}
