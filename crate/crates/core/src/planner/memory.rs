use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::forge::{ActionType, Subgoal};
use crate::scene::{Location, ObjectId, Power, Predicate, PredicateSet};
use crate::sim::Observation;

use super::{CompletionJudgment, PlannerDecision};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanState {
    pub active: usize,
    /// Never reset to false once set.
    pub completed: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub location: Location,
    pub discovered_at: u64,
}

/// Plan progress and discovered object locations shared between the two systems.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBank {
    pub plan_state: PlanState,
    pub facts: BTreeMap<ObjectId, Fact>,
    pub facts_enabled: bool,
    pub history: Vec<(u64, String)>,
}

impl MemoryBank {
    pub fn new(facts_enabled: bool) -> Self {
        Self { plan_state: PlanState::default(), facts: BTreeMap::new(), facts_enabled, history: Vec::new() }
    }

    pub fn start_plan(&mut self, len: usize) {
        self.plan_state = PlanState { active: 0, completed: vec![false; len] };
    }

    pub fn fact(&self, obj: &ObjectId) -> Option<&Location> {
        self.facts.get(obj).map(|f| &f.location)
    }

    /// Records every visible placement; a changed location overwrites the fact.
    pub fn observe(&mut self, obs: &Observation) {
        if !self.facts_enabled {
            return;
        }
        for (obj, loc) in &obs.visible_placements {
            match self.facts.get(obj) {
                Some(f) if f.location == *loc => {}
                _ => {
                    self.facts.insert(obj.clone(), Fact { location: loc.clone(), discovered_at: obs.clock });
                    self.history.push((obs.clock, format!("{obj} at {loc}")));
                }
            }
        }
    }

    pub fn record(&mut self, judgment: &CompletionJudgment, t: u64) {
        if let Some(flag) = self.plan_state.completed.get_mut(judgment.index) {
            *flag |= judgment.judged_complete;
        }
        self.history.push((t, format!("step {} complete={}", judgment.index, judgment.judged_complete)));
    }

    pub fn update(&mut self, window: &[Observation], judgment: &CompletionJudgment) {
        for obs in window {
            self.observe(obs);
        }
        let t = window.last().map_or(0, |o| o.clock);
        self.record(judgment, t);
    }

    /// Mirrors a decision onto the plan state. `new_len` is the plan length after it.
    pub fn apply(&mut self, decision: &PlannerDecision, cut: usize, new_len: usize) {
        let ps = &mut self.plan_state;
        match decision {
            PlannerDecision::AdvanceTo(j) => ps.active = *j,
            PlannerDecision::Replace(_) => {
                ps.completed.truncate(cut);
                ps.completed.resize(new_len, false);
                ps.active = cut;
            }
            PlannerDecision::DeclareDone => ps.active = ps.completed.len(),
            PlannerDecision::Continue | PlannerDecision::Answer(_) => {}
        }
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&(&self.plan_state, &self.facts)).expect("memory serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// Current observation first, then remembered facts.
pub fn believed_location(obj: &ObjectId, obs: &Observation, memory: &MemoryBank) -> Option<Location> {
    obs.location_of(obj).or_else(|| memory.fact(obj)).cloned()
}

pub fn believe(p: &Predicate, obs: &Observation, memory: &MemoryBank) -> bool {
    let at = |o: &ObjectId| believed_location(o, obs, memory);
    match p {
        Predicate::AtRegion(o, r) => at(o) == Some(Location::AtRegion(r.clone())),
        Predicate::Inside(o, f) => at(o) == Some(Location::InsideFixture(f.clone())),
        Predicate::Holding(o) => obs.gripper.as_ref() == Some(o),
        Predicate::GripperEmpty => obs.gripper.is_none() && !obs.fixture_states.is_empty(),
        Predicate::Open(f) => obs.is_open(f) == Some(true),
        Predicate::Closed(f) => obs.is_open(f) == Some(false),
        Predicate::PoweredOn(f) => obs.fixture_states.get(f).is_some_and(|v| v.power == Power::On),
        Predicate::EmptyContainer(f) => {
            let inside = Location::InsideFixture(f.clone());
            obs.fixture_states.contains_key(f)
                && !obs.visible_placements.values().any(|l| *l == inside)
                && !memory.facts.iter().any(|(o, fact)| fact.location == inside && obs.location_of(o).is_none())
        }
    }
}

pub fn believe_set(ps: &PredicateSet, obs: &Observation, memory: &MemoryBank) -> bool {
    ps.members().iter().all(|p| believe(p, obs, memory))
}

/// Whether the subgoal's effect is visible in the window (or remembered).
pub fn postcondition_met(sg: &Subgoal, window: &[Observation], memory: &MemoryBank) -> bool {
    let (Some(first), Some(last)) = (window.first(), window.last()) else {
        return false;
    };
    let at = |loc: &Option<Location>| match (&sg.object, loc) {
        (Some(o), Some(l)) => believed_location(o, last, memory).as_ref() == Some(l),
        _ => false,
    };
    match sg.action {
        ActionType::Pick => sg.object.is_some() && last.gripper == sg.object,
        ActionType::Place | ActionType::Return | ActionType::Store | ActionType::Push => at(&sg.target),
        ActionType::Pour => match (&sg.object, sg.target.as_ref().and_then(Location::region)) {
            (Some(o), Some(r)) => last.poured.iter().any(|(po, pr)| po == o && pr == r),
            _ => false,
        },
        ActionType::Open | ActionType::Close => match &sg.fixture {
            Some(f) => last.is_open(f) == Some(sg.action == ActionType::Open),
            None => false,
        },
        ActionType::Turn | ActionType::Press => match &sg.fixture {
            Some(f) => {
                let power = |o: &Observation| o.fixture_states.get(f).map(|v| v.power);
                window.len() > 1 && power(first).is_some() && power(first) != power(last)
            }
            None => false,
        },
        ActionType::Move | ActionType::Wait => true,
    }
}
