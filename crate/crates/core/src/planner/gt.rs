use crate::forge::{BinaryQuestion, Subgoal, TaskSpec};
use crate::sim::Observation;

use super::{
    advance, believe_set, judge, AnchorContext, CompletionJudgment, MemoryBank, Plan, Planner, PlannerDecision,
    PlannerError, Provenance,
};

/// Replays the ground-truth plan open loop.
#[derive(Clone, Debug)]
pub struct GtPlanner {
    plan: Vec<Subgoal>,
}

impl GtPlanner {
    pub fn new(task: &TaskSpec) -> Self {
        Self { plan: task.gt_plan.clone() }
    }
}

impl Planner for GtPlanner {
    fn provenance(&self) -> Provenance {
        Provenance::Groundtruth
    }

    fn plan(&mut self, _obs: &Observation, _memory: &MemoryBank) -> Result<Plan, PlannerError> {
        Plan::new(self.plan.clone(), Provenance::Groundtruth)
    }

    fn reflect(
        &mut self,
        window: &[Observation],
        subgoal: &Subgoal,
        index: usize,
        memory: &MemoryBank,
    ) -> Result<CompletionJudgment, PlannerError> {
        Ok(judge(window, subgoal, index, memory))
    }

    fn decide(
        &mut self,
        ctx: &AnchorContext<'_>,
        _obs: &Observation,
        _memory: &MemoryBank,
    ) -> Result<PlannerDecision, PlannerError> {
        Ok(advance(ctx))
    }

    fn answer(&mut self, q: &BinaryQuestion, obs: &Observation, memory: &MemoryBank) -> Result<bool, PlannerError> {
        Ok(believe_set(&q.query, obs, memory))
    }
}
