use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::forge::{BinaryQuestion, PrimitiveAction, Subgoal};
use crate::scene::SceneRegistry;
use crate::sim::Observation;

use super::{
    AnchorContext, CompletionJudgment, MemoryBank, Plan, Planner, PlannerDecision, PlannerError, Provenance, TaskBrief,
};

pub const WIRE_SCHEMA: &str = include_str!("../../assets/planner_wire.schema.json");
pub const PROMPT_PLANNER: &str = include_str!("../../assets/prompts/planner.txt");
pub const PROMPT_MEMORY_GOAL: &str = include_str!("../../assets/prompts/memory_goal.txt");
pub const PROMPT_UPDATE: &str = include_str!("../../assets/prompts/plan_update.txt");

/// Environment variable holding an optional bearer token for the endpoint.
pub const TOKEN_VAR: &str = "HSIM_PLANNER_TOKEN";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

fn default_timeout() -> u64 {
    10_000
}

impl ExternalConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), timeout_ms: default_timeout() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub episode_id: String,
    pub phase: String,
    pub instruction: String,
    pub category: String,
    pub observation_digest: String,
    pub memory_digest: String,
    pub prompt: String,
    pub observation: Observation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plan: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WireStep {
    Text(String),
    Structured(PrimitiveAction),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireDecision {
    Continue,
    Advance { index: usize },
    Replace { plan: Vec<WireStep> },
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireJudgment {
    pub complete: bool,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<Vec<WireStep>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judgment: Option<WireJudgment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<WireDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<bool>,
}

fn malformed(e: impl ToString) -> PlannerError {
    PlannerError::MalformedPlan(e.to_string())
}

/// Normalizes wire steps through the same parser used for rendered text.
pub fn parse_steps(steps: &[WireStep], registry: &SceneRegistry) -> Result<Vec<Subgoal>, PlannerError> {
    let out: Vec<Subgoal> = steps
        .iter()
        .map(|s| match s {
            WireStep::Text(t) => Subgoal::parse(t, registry).map_err(malformed),
            WireStep::Structured(a) => a.check(false).map(|_| Subgoal::from_action(a.clone())).map_err(malformed),
        })
        .collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(malformed("empty plan"));
    }
    Ok(out)
}

fn render(template: &str, fields: &[(&str, String)]) -> String {
    fields.iter().fold(template.to_owned(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
}

fn describe(obs: &Observation) -> String {
    let mut lines: Vec<String> = obs.visible_placements.iter().map(|(o, l)| format!("- {o}: {l}")).collect();
    for (f, v) in &obs.fixture_states {
        lines.push(format!("- {f}: {:?}/{:?}", v.articulation, v.power).to_lowercase());
    }
    lines.join("\n")
}

fn describe_memory(m: &MemoryBank) -> String {
    let facts: Vec<String> =
        m.facts.iter().map(|(o, f)| format!("- {o} last seen at {} (t={})", f.location, f.discovered_at)).collect();
    if facts.is_empty() {
        "(empty)".into()
    } else {
        facts.join("\n")
    }
}

fn agent(timeout_ms: u64) -> ureq::Agent {
    ureq::Agent::config_builder().timeout_global(Some(Duration::from_millis(timeout_ms))).build().into()
}

fn exchange(agent: &ureq::Agent, url: &str, req: &WireRequest) -> Result<WireResponse, PlannerError> {
    let mut call = agent.post(url);
    if let Ok(token) = std::env::var(TOKEN_VAR) {
        call = call.header("Authorization", &format!("Bearer {token}"));
    }
    let mut resp = call.send_json(req).map_err(|e| PlannerError::ExternalUnavailable(e.to_string()))?;
    let text = resp.body_mut().read_to_string().map_err(|e| PlannerError::ExternalUnavailable(e.to_string()))?;
    serde_json::from_str(&text).map_err(malformed)
}

/// A planner served over HTTP: one JSON request per phase, at most one in
/// flight per episode.
pub struct ExternalPlanner {
    cfg: ExternalConfig,
    agent: ureq::Agent,
    brief: TaskBrief,
    registry: SceneRegistry,
    episode_id: String,
    pending: Option<WireDecision>,
}

impl ExternalPlanner {
    pub fn new(cfg: ExternalConfig, brief: TaskBrief, registry: SceneRegistry, episode_id: impl Into<String>) -> Self {
        let agent = agent(cfg.timeout_ms);
        Self { cfg, agent, brief, registry, episode_id: episode_id.into(), pending: None }
    }

    fn request(&self, phase: &str, prompt: String, obs: &Observation, memory: &MemoryBank) -> WireRequest {
        WireRequest {
            episode_id: self.episode_id.clone(),
            phase: phase.into(),
            instruction: self.brief.instruction.clone(),
            category: self.brief.category.slug().into(),
            observation_digest: obs.digest(),
            memory_digest: memory.digest(),
            prompt,
            observation: obs.clone(),
            plan: Vec::new(),
            active: None,
            question: None,
        }
    }

    fn common(&self, obs: &Observation, memory: &MemoryBank) -> Vec<(&'static str, String)> {
        vec![
            ("instruction", self.brief.instruction.clone()),
            ("category", self.brief.category.slug().to_owned()),
            ("observation", describe(obs)),
            ("memory", describe_memory(memory)),
        ]
    }
}

impl Planner for ExternalPlanner {
    fn provenance(&self) -> Provenance {
        Provenance::External
    }

    fn plan(&mut self, obs: &Observation, memory: &MemoryBank) -> Result<Plan, PlannerError> {
        let mut steps = Vec::new();
        if self.brief.category.needs_memory() {
            let mut fields = self.common(obs, memory);
            let candidates = self
                .brief
                .memory
                .as_ref()
                .map(|m| m.candidates.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "));
            fields.push(("candidates", candidates.unwrap_or_default()));
            let req = self.request("memory_goal", render(PROMPT_MEMORY_GOAL, &fields), obs, memory);
            let resp = exchange(&self.agent, &self.cfg.url, &req)?;
            if let Some(p) = resp.plan {
                steps.extend(parse_steps(&p, &self.registry)?);
            }
        }
        let req = self.request("plan", render(PROMPT_PLANNER, &self.common(obs, memory)), obs, memory);
        let resp = exchange(&self.agent, &self.cfg.url, &req)?;
        let plan = resp.plan.ok_or_else(|| malformed("response carries no plan"))?;
        steps.extend(parse_steps(&plan, &self.registry)?);
        Plan::new(steps, Provenance::External)
    }

    fn reflect(
        &mut self,
        window: &[Observation],
        subgoal: &Subgoal,
        index: usize,
        memory: &MemoryBank,
    ) -> Result<CompletionJudgment, PlannerError> {
        let last = window.last().cloned().unwrap_or_else(Observation::empty);
        let mut fields = self.common(&last, memory);
        fields.push(("plan", String::new()));
        fields.push(("active", index.to_string()));
        fields.push(("subgoal", subgoal.text.clone()));
        let mut req = self.request("update", render(PROMPT_UPDATE, &fields), &last, memory);
        req.active = Some(index);
        req.plan = vec![subgoal.text.clone()];
        let resp = exchange(&self.agent, &self.cfg.url, &req)?;
        self.pending = resp.decision;
        let j = resp.judgment.ok_or_else(|| malformed("response carries no judgment"))?;
        Ok(CompletionJudgment { index, judged_complete: j.complete, rationale: j.rationale })
    }

    fn decide(
        &mut self,
        ctx: &AnchorContext<'_>,
        _obs: &Observation,
        _memory: &MemoryBank,
    ) -> Result<PlannerDecision, PlannerError> {
        Ok(match self.pending.take() {
            None | Some(WireDecision::Continue) => PlannerDecision::Continue,
            Some(WireDecision::Advance { index }) if index <= ctx.plan.len() => PlannerDecision::AdvanceTo(index),
            Some(WireDecision::Advance { index }) => return Err(malformed(format!("advance to {index} out of range"))),
            Some(WireDecision::Replace { plan }) => {
                PlannerDecision::Replace(Plan::new(parse_steps(&plan, &self.registry)?, Provenance::External)?)
            }
            Some(WireDecision::Done) => PlannerDecision::DeclareDone,
        })
    }

    fn answer(&mut self, q: &BinaryQuestion, obs: &Observation, memory: &MemoryBank) -> Result<bool, PlannerError> {
        let mut req = self.request("qa", q.text.clone(), obs, memory);
        req.question = Some(q.text.clone());
        exchange(&self.agent, &self.cfg.url, &req)?.answer.ok_or_else(|| malformed("response carries no answer"))
    }
}

/// Round-trips a fixed planning request and returns the parsed plan.
pub fn probe(cfg: &ExternalConfig, registry: &SceneRegistry) -> Result<Vec<Subgoal>, PlannerError> {
    let obs = Observation::empty();
    let memory = MemoryBank::new(false);
    let req = WireRequest {
        episode_id: "probe".into(),
        phase: "plan".into(),
        instruction: "Put the plate on the dining table.".into(),
        category: "ideal".into(),
        observation_digest: obs.digest(),
        memory_digest: memory.digest(),
        prompt: render(
            PROMPT_PLANNER,
            &[
                ("instruction", "Put the plate on the dining table.".into()),
                ("category", "ideal".into()),
                ("observation", String::new()),
                ("memory", "(empty)".into()),
            ],
        ),
        observation: obs,
        plan: Vec::new(),
        active: None,
        question: None,
    };
    let resp = exchange(&agent(cfg.timeout_ms), &cfg.url, &req)?;
    parse_steps(&resp.plan.ok_or_else(|| malformed("response carries no plan"))?, registry)
}
