use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::scene::{Articulation, FixtureId, Location, ObjectId, SceneRegistry, SceneState};

use super::observe::Staleness;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// Fires at the step call made while the clock reads this value.
    AtStep(u64),
    /// Fires at the first step call after this many key transitions have been achieved.
    AfterTransition(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Relocate { object: ObjectId, to: Location },
    DropHeld,
    FlipArticulation { fixture: FixtureId },
    SwapObjects { first: ObjectId, second: ObjectId },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationEvent {
    pub trigger: Trigger,
    pub kind: PerturbationKind,
    /// Silent moves leave the observer's belief stale under mismatch observation.
    #[serde(default)]
    pub silent: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerturbationSchedule {
    pub events: Vec<PerturbationEvent>,
}

impl PerturbationSchedule {
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Objects whose location a silent event can make stale.
    pub fn silent_objects(&self) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        for e in self.events.iter().filter(|e| e.silent) {
            match &e.kind {
                PerturbationKind::Relocate { object, .. } => {
                    out.insert(object.clone());
                }
                PerturbationKind::SwapObjects { first, second } => {
                    out.insert(first.clone());
                    out.insert(second.clone());
                }
                _ => {}
            }
        }
        out
    }

    pub fn check(&self, registry: &SceneRegistry) -> Result<(), String> {
        for e in &self.events {
            match &e.kind {
                PerturbationKind::Relocate { object, to } => {
                    if registry.object(object).is_none() {
                        return Err(format!("relocate of unknown object {object}"));
                    }
                    if *to == Location::InGripper || !registry.location_declared(to) {
                        return Err(format!("relocate target {to} does not exist"));
                    }
                }
                PerturbationKind::FlipArticulation { fixture } => {
                    if !registry.fixture(fixture).is_some_and(|f| f.articulation != Articulation::Fixed) {
                        return Err(format!("cannot flip {fixture}"));
                    }
                }
                PerturbationKind::SwapObjects { first, second } => {
                    if registry.object(first).is_none() || registry.object(second).is_none() {
                        return Err("swap of unknown object".into());
                    }
                }
                PerturbationKind::DropHeld => {}
            }
        }
        Ok(())
    }
}

/// Record of an event that fired, with its schedule index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredEvent {
    pub index: usize,
    pub event: PerturbationEvent,
    /// False when the event had nothing to act on (e.g. a drop with an empty gripper).
    pub effective: bool,
}

/// Applies every not-yet-fired event whose trigger matches step `t` or transition count `k`.
pub fn inject(
    registry: &SceneRegistry,
    state: &mut SceneState,
    schedule: &PerturbationSchedule,
    fired: &mut BTreeSet<usize>,
    staleness: &mut Staleness,
    t: u64,
    k: usize,
) -> Vec<FiredEvent> {
    let mut out = Vec::new();
    for (index, event) in schedule.events.iter().enumerate() {
        if fired.contains(&index) {
            continue;
        }
        let due = match event.trigger {
            Trigger::AtStep(at) => at == t,
            Trigger::AfterTransition(need) => k >= need,
        };
        if !due {
            continue;
        }
        fired.insert(index);
        let effective = apply_event(registry, state, event, staleness);
        out.push(FiredEvent { index, event: event.clone(), effective });
    }
    out
}

fn apply_event(
    registry: &SceneRegistry,
    state: &mut SceneState,
    event: &PerturbationEvent,
    staleness: &mut Staleness,
) -> bool {
    let mut moved: Vec<(ObjectId, Location)> = Vec::new();
    match &event.kind {
        PerturbationKind::Relocate { object, to } => {
            if !state.placements.contains_key(object) || !state.location_exists(to) || *to == Location::InGripper {
                return false;
            }
            let from = state.placements.insert(object.clone(), to.clone()).expect("present");
            moved.push((object.clone(), from));
        }
        PerturbationKind::DropHeld => {
            let Some(held) = state.held().cloned() else {
                return false;
            };
            state.placements.insert(held.clone(), Location::AtRegion(registry.floor_region.clone()));
            moved.push((held, Location::InGripper));
        }
        PerturbationKind::FlipArticulation { fixture } => {
            let Some(fx) = state.fixtures.get_mut(fixture) else {
                return false;
            };
            fx.articulation = match fx.articulation {
                Articulation::Open => Articulation::Closed,
                Articulation::Closed => Articulation::Open,
                Articulation::Fixed => return false,
            };
        }
        PerturbationKind::SwapObjects { first, second } => {
            let (Some(a), Some(b)) = (state.placements.get(first).cloned(), state.placements.get(second).cloned())
            else {
                return false;
            };
            state.placements.insert(first.clone(), b);
            state.placements.insert(second.clone(), a.clone());
            moved.push((first.clone(), a));
            moved.push((second.clone(), state.placements[first].clone()));
        }
    }
    if event.silent {
        for (obj, before) in moved {
            staleness.mark(obj, before);
        }
    }
    true
}
