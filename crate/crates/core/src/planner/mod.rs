//! High-level planners, the memory bank and the task-aware memory mechanism.

mod blind;
mod brief;
mod external;
mod gt;
mod mechanism;
mod memory;
mod random;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forge::{BinaryQuestion, Subgoal};
use crate::scene::ObjectId;
use crate::sim::{Observation, Requirement};

pub use blind::Blind;
pub use brief::{MemoryBrief, TaskBrief};
pub use external::{
    probe, ExternalConfig, ExternalPlanner, WireDecision, WireRequest, WireResponse, PROMPT_MEMORY_GOAL,
    PROMPT_PLANNER, PROMPT_UPDATE, WIRE_SCHEMA,
};
pub use gt::GtPlanner;
pub use mechanism::{run_memory_mechanism, MechanismOutcome};
pub use memory::{believe, believe_set, believed_location, postcondition_met, Fact, MemoryBank, PlanState};
pub use random::RandomPlanner;
pub use scripted::{ScriptedConfig, ScriptedPlanner};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Groundtruth,
    Scripted,
    Random,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub subgoals: Vec<Subgoal>,
    pub provenance: Provenance,
}

impl Plan {
    pub fn new(subgoals: Vec<Subgoal>, provenance: Provenance) -> Result<Self, PlannerError> {
        if subgoals.is_empty() {
            return Err(PlannerError::MalformedPlan("empty plan".into()));
        }
        Ok(Self { subgoals, provenance })
    }

    pub fn len(&self) -> usize {
        self.subgoals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgoals.is_empty()
    }

    /// Exact, order-sensitive agreement of canonical tuples.
    pub fn matches(&self, reference: &[Subgoal]) -> bool {
        self.subgoals.len() == reference.len()
            && self.subgoals.iter().zip(reference).all(|(a, b)| a.canonical() == b.canonical())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryAnswer {
    pub question: String,
    pub answer: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerDecision {
    Continue,
    AdvanceTo(usize),
    /// Replaces the plan from the active subgoal (or the one after it, when
    /// the active one was judged complete).
    Replace(Plan),
    DeclareDone,
    Answer(BinaryAnswer),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionJudgment {
    pub index: usize,
    pub judged_complete: bool,
    pub rationale: String,
}

/// What the planner learns at an anchor besides observations.
#[derive(Clone, Debug)]
pub struct AnchorContext<'a> {
    pub index: usize,
    pub plan: &'a [Subgoal],
    pub judgment: &'a CompletionJudgment,
    /// Anchors spent on the active subgoal so far, this one included.
    pub attempts: u32,
    /// Object that slipped from the gripper during the last macro.
    pub dropped: Option<ObjectId>,
    pub failure: Option<Requirement>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlannerError {
    #[error("external planner unavailable: {0}")]
    ExternalUnavailable(String),
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("the memory mechanism only applies to memory categories")]
    NotMemoryTask,
}

/// System 2. Every method receives observations already filtered through
/// [`Planner::view`].
pub trait Planner: Send {
    fn provenance(&self) -> Provenance;

    /// What this planner is allowed to see of an observation.
    fn view(&self, obs: &Observation) -> Observation {
        obs.clone()
    }

    /// Whether discovered locations are retained in the memory bank.
    fn uses_memory(&self) -> bool {
        true
    }

    fn plan(&mut self, obs: &Observation, memory: &MemoryBank) -> Result<Plan, PlannerError>;

    /// Grounds unbound slots of `plan[index]` just before it executes.
    fn resolve(
        &mut self,
        _plan: &mut [Subgoal],
        _index: usize,
        _obs: &Observation,
        _memory: &MemoryBank,
    ) -> Result<(), PlannerError> {
        Ok(())
    }

    fn reflect(
        &mut self,
        window: &[Observation],
        subgoal: &Subgoal,
        index: usize,
        memory: &MemoryBank,
    ) -> Result<CompletionJudgment, PlannerError>;

    fn decide(
        &mut self,
        ctx: &AnchorContext<'_>,
        obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<PlannerDecision, PlannerError>;

    fn answer(
        &mut self,
        question: &BinaryQuestion,
        obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<bool, PlannerError>;
}

/// Judgment from belief alone, shared by the built-in planners.
pub(crate) fn judge(
    window: &[Observation],
    subgoal: &Subgoal,
    index: usize,
    memory: &MemoryBank,
) -> CompletionJudgment {
    let done = postcondition_met(subgoal, window, memory);
    CompletionJudgment {
        index,
        judged_complete: done,
        rationale: format!("{} {}", subgoal.text, if done { "observed" } else { "not observed" }),
    }
}

/// Open-loop progression: always move on.
pub(crate) fn advance(ctx: &AnchorContext<'_>) -> PlannerDecision {
    if ctx.index + 1 >= ctx.plan.len() {
        PlannerDecision::DeclareDone
    } else {
        PlannerDecision::AdvanceTo(ctx.index + 1)
    }
}

impl<P: Planner + ?Sized> Planner for Box<P> {
    fn provenance(&self) -> Provenance {
        (**self).provenance()
    }

    fn view(&self, obs: &Observation) -> Observation {
        (**self).view(obs)
    }

    fn uses_memory(&self) -> bool {
        (**self).uses_memory()
    }

    fn plan(&mut self, obs: &Observation, memory: &MemoryBank) -> Result<Plan, PlannerError> {
        (**self).plan(obs, memory)
    }

    fn resolve(
        &mut self,
        plan: &mut [Subgoal],
        index: usize,
        obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<(), PlannerError> {
        (**self).resolve(plan, index, obs, memory)
    }

    fn reflect(
        &mut self,
        window: &[Observation],
        subgoal: &Subgoal,
        index: usize,
        memory: &MemoryBank,
    ) -> Result<CompletionJudgment, PlannerError> {
        (**self).reflect(window, subgoal, index, memory)
    }

    fn decide(
        &mut self,
        ctx: &AnchorContext<'_>,
        obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<PlannerDecision, PlannerError> {
        (**self).decide(ctx, obs, memory)
    }

    fn answer(
        &mut self,
        question: &BinaryQuestion,
        obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<bool, PlannerError> {
        (**self).answer(question, obs, memory)
    }
}
