use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forge::{BinaryQuestion, Subgoal};
use crate::sim::Observation;

use super::{AnchorContext, CompletionJudgment, MemoryBank, Plan, Planner, PlannerDecision, PlannerError, Provenance};

/// Disables vision for the wrapped planner: every observation it receives is
/// empty, nothing is remembered, subgoals are assumed to succeed and
/// questions are answered by a fair coin.
pub struct Blind<P> {
    inner: P,
    coin: ChaCha8Rng,
}

impl<P: Planner> Blind<P> {
    pub fn new(inner: P, seed: u64) -> Self {
        Self { inner, coin: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl<P: Planner> Planner for Blind<P> {
    fn provenance(&self) -> Provenance {
        self.inner.provenance()
    }

    fn view(&self, _obs: &Observation) -> Observation {
        Observation::empty()
    }

    fn uses_memory(&self) -> bool {
        false
    }

    fn plan(&mut self, _obs: &Observation, memory: &MemoryBank) -> Result<Plan, PlannerError> {
        self.inner.plan(&Observation::empty(), memory)
    }

    fn resolve(
        &mut self,
        plan: &mut [Subgoal],
        index: usize,
        _obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<(), PlannerError> {
        self.inner.resolve(plan, index, &Observation::empty(), memory)
    }

    fn reflect(
        &mut self,
        _window: &[Observation],
        subgoal: &Subgoal,
        index: usize,
        _memory: &MemoryBank,
    ) -> Result<CompletionJudgment, PlannerError> {
        Ok(CompletionJudgment { index, judged_complete: true, rationale: format!("{} assumed done", subgoal.text) })
    }

    fn decide(
        &mut self,
        ctx: &AnchorContext<'_>,
        _obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<PlannerDecision, PlannerError> {
        self.inner.decide(ctx, &Observation::empty(), memory)
    }

    fn answer(&mut self, _q: &BinaryQuestion, _obs: &Observation, _memory: &MemoryBank) -> Result<bool, PlannerError> {
        Ok(self.coin.random_bool(0.5))
    }
}
