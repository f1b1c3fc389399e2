use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forge::{Category, TaskSpec};
use crate::metrics::MetricsReport;
use crate::planner::{
    Blind, ExternalConfig, ExternalPlanner, GtPlanner, Planner, RandomPlanner, ScriptedConfig, ScriptedPlanner,
    TaskBrief,
};
use crate::seed::{episode_seed, split};
use crate::sim::{NoiseConfig, ObservationMode};

use super::episode::{default_mode, run_episode, EpisodeConfig};
use super::trace::{EpisodeTrace, Terminal};
use super::AnchorPolicy;

/// Which System 2 drives the episodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PlannerSpec {
    Gt,
    Random,
    Scripted,
    ScriptedNoMemory,
    ScriptedNoReplan,
    BlindScripted,
    External(String),
}

impl PlannerSpec {
    pub fn build(&self, task: &TaskSpec, seed: u64, trial: u32) -> Box<dyn Planner> {
        let seed = split(seed, &["planner"]);
        let scripted = |cfg: ScriptedConfig| ScriptedPlanner::new(TaskBrief::from_task(task), cfg, seed);
        match self {
            PlannerSpec::Gt => Box::new(GtPlanner::new(task)),
            PlannerSpec::Random => Box::new(RandomPlanner::new(task, seed)),
            PlannerSpec::Scripted => Box::new(scripted(ScriptedConfig::default())),
            PlannerSpec::ScriptedNoMemory => {
                Box::new(scripted(ScriptedConfig { memory: false, ..ScriptedConfig::default() }))
            }
            PlannerSpec::ScriptedNoReplan => {
                Box::new(scripted(ScriptedConfig { replan: false, ..ScriptedConfig::default() }))
            }
            PlannerSpec::BlindScripted => {
                Box::new(Blind::new(scripted(ScriptedConfig::default()), split(seed, &["blind"])))
            }
            PlannerSpec::External(url) => Box::new(ExternalPlanner::new(
                ExternalConfig::new(url.clone()),
                TaskBrief::from_task(task),
                task.registry().clone(),
                format!("{}__t{trial}", task.id),
            )),
        }
    }
}

impl fmt::Display for PlannerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlannerSpec::Gt => f.write_str("gt"),
            PlannerSpec::Random => f.write_str("random"),
            PlannerSpec::Scripted => f.write_str("scripted"),
            PlannerSpec::ScriptedNoMemory => f.write_str("scripted-nomemory"),
            PlannerSpec::ScriptedNoReplan => f.write_str("scripted-noreplan"),
            PlannerSpec::BlindScripted => f.write_str("blind-scripted"),
            PlannerSpec::External(url) => write!(f, "external:{url}"),
        }
    }
}

impl FromStr for PlannerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "gt" => PlannerSpec::Gt,
            "random" => PlannerSpec::Random,
            "scripted" => PlannerSpec::Scripted,
            "scripted-nomemory" => PlannerSpec::ScriptedNoMemory,
            "scripted-noreplan" => PlannerSpec::ScriptedNoReplan,
            "blind-scripted" => PlannerSpec::BlindScripted,
            other => match other.strip_prefix("external:") {
                Some(url) if !url.is_empty() => PlannerSpec::External(url.to_owned()),
                _ => return Err(format!("unknown planner `{other}`")),
            },
        })
    }
}

impl TryFrom<String> for PlannerSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PlannerSpec> for String {
    fn from(p: PlannerSpec) -> Self {
        p.to_string()
    }
}

pub const DEFAULT_TRIALS: u32 = 10;

fn default_trials() -> u32 {
    DEFAULT_TRIALS
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub planner: PlannerSpec,
    #[serde(default = "NoiseConfig::benchmark")]
    pub noise: NoiseConfig,
    /// Overrides of the per-category default observation mode.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub modes: BTreeMap<Category, ObservationMode>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default = "yes")]
    pub perturbations: bool,
    /// Overrides every task's own anchor policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<AnchorPolicy>,
    #[serde(default)]
    pub multiset_plan_match: bool,
}

impl RunConfig {
    pub fn new(planner: PlannerSpec, seed: u64) -> Self {
        Self {
            planner,
            noise: NoiseConfig::benchmark(),
            modes: BTreeMap::new(),
            trials: DEFAULT_TRIALS,
            seed,
            parallelism: 0,
            perturbations: true,
            anchor: None,
            multiset_plan_match: false,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.noise.success_prob) || !(0.0..=1.0).contains(&self.noise.drop_prob) {
            return Err("noise probabilities must lie in [0, 1]".into());
        }
        if let Some(a) = &self.anchor {
            a.check()?;
        }
        Ok(())
    }

    pub fn episode_config(&self, task: &TaskSpec) -> EpisodeConfig {
        EpisodeConfig {
            noise: self.noise,
            mode: self.modes.get(&task.category).cloned().unwrap_or_else(|| default_mode(task)),
            perturbations: self.perturbations,
            anchor: self.anchor.unwrap_or(task.anchor_policy),
        }
    }

    /// One episode, fully determined by the task, the trial index and this config.
    pub fn run_one(&self, task: &TaskSpec, trial: u32) -> EpisodeTrace {
        let seed = episode_seed(self.seed, &task.id, trial);
        let mut planner = self.planner.build(task, seed, trial);
        run_episode(task, planner.as_mut(), &self.episode_config(task), trial, seed, &self.planner.to_string())
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    /// Sorted by task id, then trial.
    pub traces: Vec<EpisodeTrace>,
    pub report: MetricsReport,
    /// Set when cancellation skipped some episodes.
    pub partial: bool,
}

impl BenchmarkRun {
    pub fn any_aborted(&self) -> bool {
        self.traces.iter().any(|t| t.summary.terminal == Terminal::Aborted)
    }
}

/// Runs every (task, trial) pair in parallel. Episodes not yet started when
/// `cancel` is raised are skipped; in-flight ones finish.
pub fn run_benchmark(tasks: &[TaskSpec], cfg: &RunConfig, cancel: Option<&AtomicBool>) -> BenchmarkRun {
    let jobs: Vec<(&TaskSpec, u32)> = tasks.iter().flat_map(|t| (0..cfg.trials).map(move |i| (t, i))).collect();
    let work = || -> Vec<Option<EpisodeTrace>> {
        jobs.par_iter()
            .map(|(task, trial)| {
                if cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
                    return None;
                }
                Some(cfg.run_one(task, *trial))
            })
            .collect()
    };
    let results = if cfg.parallelism > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        }
    } else {
        work()
    };
    let partial = results.iter().any(Option::is_none);
    let mut traces: Vec<EpisodeTrace> = results.into_iter().flatten().collect();
    traces.sort_by(|a, b| (&a.header.task, a.header.trial).cmp(&(&b.header.task, b.header.trial)));
    let report = MetricsReport::from_traces(&cfg.planner.to_string(), &traces, cfg.multiset_plan_match);
    BenchmarkRun { traces, report, partial }
}
