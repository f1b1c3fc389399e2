use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forge::{ActionType, BinaryQuestion, PrimitiveAction, Subgoal};
use crate::scene::{FixtureId, Location, ObjectId};
use crate::sim::Observation;

use super::{
    advance, believe_set, believed_location, judge, AnchorContext, CompletionJudgment, MemoryBank, Plan, Planner,
    PlannerDecision, PlannerError, Provenance, TaskBrief,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScriptedConfig {
    /// Repair the plan on detected deviations and branch on discoveries.
    pub replan: bool,
    /// Anchors spent on one subgoal before moving on regardless.
    pub max_attempts: u32,
    /// Exploration order; candidates in declaration order when unset.
    pub sweep_order: Option<Vec<FixtureId>>,
    /// Keep discovered locations in the memory bank.
    pub memory: bool,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        Self { replan: true, max_attempts: 3, sweep_order: None, memory: true }
    }
}

/// Rule-based hierarchical planner: fills the skeleton from observation and
/// memory, sweeps candidate containers for hidden targets, and repairs the
/// plan when what it sees disagrees with what it expected.
#[derive(Clone, Debug)]
pub struct ScriptedPlanner {
    brief: TaskBrief,
    cfg: ScriptedConfig,
    rng: ChaCha8Rng,
    sweep_len: usize,
    branched: bool,
}

impl ScriptedPlanner {
    pub fn new(brief: TaskBrief, cfg: ScriptedConfig, seed: u64) -> Self {
        Self { brief, cfg, rng: ChaCha8Rng::seed_from_u64(seed), sweep_len: 0, branched: false }
    }

    fn target(&self) -> Option<&ObjectId> {
        self.brief.memory.as_ref().map(|m| &m.target)
    }

    fn sweep(&self) -> Vec<FixtureId> {
        match (&self.cfg.sweep_order, &self.brief.memory) {
            (Some(order), _) if !order.is_empty() => order.clone(),
            (_, Some(m)) => m.candidates.clone(),
            _ => Vec::new(),
        }
    }

    /// Where the planner thinks the target is, guessing among candidates when
    /// it has no evidence.
    fn target_location(&mut self, obs: &Observation, memory: &MemoryBank) -> Option<Location> {
        let target = self.target()?.clone();
        if let Some(l) = believed_location(&target, obs, memory).filter(|l| *l != Location::InGripper) {
            return Some(l);
        }
        let candidates = &self.brief.memory.as_ref()?.candidates;
        candidates.choose(&mut self.rng).cloned().map(Location::InsideFixture)
    }

    /// Binds every blank slot about the target in `steps` to `loc`.
    fn bind_target(&self, steps: &mut [Subgoal], loc: &Location) {
        let Some(target) = self.target() else { return };
        for sg in steps {
            let mut changed = false;
            if sg.action == ActionType::Pick && sg.source.is_none() && sg.object.as_ref() == Some(target) {
                sg.source = Some(loc.clone());
                changed = true;
            }
            if sg.action.targets_fixture() && sg.fixture.is_none() {
                if let Location::InsideFixture(f) = loc {
                    sg.fixture = Some(f.clone());
                    changed = true;
                }
            }
            if changed {
                sg.rerender();
            }
        }
    }

    fn branch(&self, container: &FixtureId) -> Vec<Subgoal> {
        let mut steps = self.brief.skeleton.clone();
        self.bind_target(&mut steps, &Location::InsideFixture(container.clone()));
        steps
    }
}

fn pick_from(o: &ObjectId, loc: Option<&Location>) -> Subgoal {
    let mut a = PrimitiveAction::new(ActionType::Pick).with_object(o.clone());
    a.source = loc.cloned();
    a.into()
}

impl Planner for ScriptedPlanner {
    fn provenance(&self) -> Provenance {
        Provenance::Scripted
    }

    fn uses_memory(&self) -> bool {
        self.cfg.memory
    }

    fn plan(&mut self, _obs: &Observation, _memory: &MemoryBank) -> Result<Plan, PlannerError> {
        let mut steps: Vec<Subgoal> = Vec::new();
        if self.brief.category.explores() {
            for c in self.sweep() {
                steps.push(PrimitiveAction::open(c.clone()).into());
                steps.push(PrimitiveAction::close(c).into());
            }
        }
        self.sweep_len = steps.len();
        self.branched = false;
        steps.extend(self.brief.skeleton.iter().cloned());
        Plan::new(steps, Provenance::Scripted)
    }

    fn resolve(
        &mut self,
        plan: &mut [Subgoal],
        index: usize,
        obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<(), PlannerError> {
        let sg = &plan[index];
        if sg.is_bound() {
            return Ok(());
        }
        let about_target =
            self.target().is_some() && (sg.object.as_ref() == self.target() || sg.action.targets_fixture());
        if sg.action == ActionType::Pick && !about_target {
            let o = sg.object.clone().expect("pick names an object");
            if let Some(l) = believed_location(&o, obs, memory).filter(|l| *l != Location::InGripper) {
                plan[index].source = Some(l);
                plan[index].rerender();
            }
            return Ok(());
        }
        if about_target {
            if let Some(loc) = self.target_location(obs, memory) {
                self.bind_target(&mut plan[index..], &loc);
            }
        }
        Ok(())
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
        obs: &Observation,
        _memory: &MemoryBank,
    ) -> Result<PlannerDecision, PlannerError> {
        let i = ctx.index;
        if self.cfg.replan && self.brief.category.explores() && !self.branched && i < self.sweep_len {
            let found = self.target().and_then(|t| obs.location_of(t)).and_then(Location::fixture).cloned();
            let candidate = found.filter(|f| self.brief.memory.as_ref().is_some_and(|m| m.candidates.contains(f)));
            if let Some(f) = candidate {
                self.branched = true;
                return Ok(PlannerDecision::Replace(Plan::new(self.branch(&f), Provenance::Scripted)?));
            }
        }
        if ctx.judgment.judged_complete {
            return Ok(advance(ctx));
        }
        if self.cfg.replan {
            let sg = &ctx.plan[i];
            let rest = || ctx.plan[i + 1..].iter().cloned();
            let puts_down =
                matches!(sg.action, ActionType::Place | ActionType::Return | ActionType::Store | ActionType::Pour);
            if let Some(o) = sg.object.as_ref() {
                let seen = obs.location_of(o).filter(|l| **l != Location::InGripper);
                if puts_down && obs.gripper.as_ref() != Some(o) {
                    if let Some(l) = seen {
                        let steps =
                            std::iter::once(pick_from(o, Some(l))).chain(std::iter::once(sg.clone())).chain(rest());
                        return Ok(PlannerDecision::Replace(Plan::new(steps.collect(), Provenance::Scripted)?));
                    }
                }
                if sg.action == ActionType::Pick {
                    if let Some(l) = seen.filter(|l| sg.source.as_ref() != Some(*l)) {
                        let steps = std::iter::once(pick_from(o, Some(l))).chain(rest());
                        return Ok(PlannerDecision::Replace(Plan::new(steps.collect(), Provenance::Scripted)?));
                    }
                }
            }
        }
        if ctx.attempts < self.cfg.max_attempts {
            Ok(PlannerDecision::Continue)
        } else {
            Ok(advance(ctx))
        }
    }

    fn answer(&mut self, q: &BinaryQuestion, obs: &Observation, memory: &MemoryBank) -> Result<bool, PlannerError> {
        Ok(believe_set(&q.query, obs, memory))
    }
}
