use serde::{Deserialize, Serialize};

use crate::forge::{Category, PrimitiveAction, Subgoal};
use crate::planner::{CompletionJudgment, PlannerDecision};
use crate::scene::ObjectId;
use crate::sim::{FiredEvent, Requirement, StepStatus};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub task: String,
    pub category: Category,
    pub trial: u32,
    pub seed: u64,
    pub planner: String,
    /// Whether each key transition's predicate set holds in the initial state.
    pub initial_holds: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Clock after the step.
    pub t: u64,
    /// Active subgoal index.
    pub subgoal: usize,
    pub primitive: PrimitiveAction,
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated: Option<Requirement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<FiredEvent>,
    /// Digest of what System 1 observed after the step.
    pub obs: String,
    /// Whether each key transition's predicate set holds after the step.
    pub holds: Vec<bool>,
    /// Ordered-achievement count after the step.
    pub achieved: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub t: u64,
    pub answer: bool,
    pub truth: bool,
}

impl QaRecord {
    pub fn correct(&self) -> bool {
        self.answer == self.truth
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub t: u64,
    pub index: usize,
    pub subgoal: String,
    pub judgment: CompletionJudgment,
    pub decision: PlannerDecision,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub qa: Vec<QaRecord>,
    pub memory: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Done,
    PlanExhausted,
    MaxSteps,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationRecord {
    /// Exploration subgoals executed up to and including the one that revealed the target.
    pub pi_g: Vec<PrimitiveAction>,
    pub pi_gt: Vec<PrimitiveAction>,
    /// Whether any observation revealed the target.
    pub located: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub terminal: Terminal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    pub achieved: usize,
    /// Clock value at which each key transition was achieved.
    pub transition_times: Vec<Option<u64>>,
    pub plan_pred: Vec<Subgoal>,
    pub plan_match: bool,
    pub plan_match_multiset: bool,
    /// Every subgoal activation, retries and replacements included.
    pub executions: Vec<PrimitiveAction>,
    pub primitives: u64,
    pub qa: Vec<QaRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fired: Vec<FiredEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exploration: Option<ExplorationRecord>,
    /// Whether the first retrieval of a memory target was aimed at its true location.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_correct: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Header(EpisodeHeader),
    Step(StepRecord),
    Anchor(AnchorRecord),
    Summary(EpisodeSummary),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceEvent {
    Step(StepRecord),
    Anchor(AnchorRecord),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeTrace {
    pub header: EpisodeHeader,
    /// Steps and anchors in the order they happened.
    pub events: Vec<TraceEvent>,
    pub summary: EpisodeSummary,
}

impl EpisodeTrace {
    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn anchors(&self) -> impl Iterator<Item = &AnchorRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Anchor(a) => Some(a),
            _ => None,
        })
    }

    pub fn file_name(&self) -> String {
        format!("{}__t{}.jsonl", self.header.task, self.header.trial)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: TraceLine| {
            out.push_str(&serde_json::to_string(&line).expect("trace serializes"));
            out.push('\n');
        };
        push(TraceLine::Header(self.header.clone()));
        for e in &self.events {
            push(match e {
                TraceEvent::Step(s) => TraceLine::Step(s.clone()),
                TraceEvent::Anchor(a) => TraceLine::Anchor(a.clone()),
            });
        }
        push(TraceLine::Summary(self.summary.clone()));
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut header = None;
        let mut summary = None;
        let mut events = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: TraceLine = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
            match parsed {
                TraceLine::Header(h) => header = Some(h),
                TraceLine::Step(s) => events.push(TraceEvent::Step(s)),
                TraceLine::Anchor(a) => events.push(TraceEvent::Anchor(a)),
                TraceLine::Summary(s) => summary = Some(s),
            }
        }
        Ok(Self { header: header.ok_or("missing header")?, events, summary: summary.ok_or("missing summary")? })
    }
}
