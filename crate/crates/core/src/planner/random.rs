use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::forge::{BinaryQuestion, Subgoal, TaskSpec};
use crate::sim::Observation;

use super::{
    advance, believe_set, judge, AnchorContext, CompletionJudgment, MemoryBank, Plan, Planner, PlannerDecision,
    PlannerError, Provenance,
};

/// A uniformly shuffled ground-truth plan, executed open loop.
#[derive(Clone, Debug)]
pub struct RandomPlanner {
    steps: Vec<Subgoal>,
    rng: ChaCha8Rng,
}

impl RandomPlanner {
    pub fn new(task: &TaskSpec, seed: u64) -> Self {
        Self { steps: task.gt_plan.clone(), rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Planner for RandomPlanner {
    fn provenance(&self) -> Provenance {
        Provenance::Random
    }

    fn plan(&mut self, _obs: &Observation, _memory: &MemoryBank) -> Result<Plan, PlannerError> {
        let mut steps = self.steps.clone();
        steps.shuffle(&mut self.rng);
        Plan::new(steps, Provenance::Random)
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
