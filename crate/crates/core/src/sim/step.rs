use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forge::{ActionType, PrimitiveAction};
use crate::scene::{
    Articulation, FixtureId, Location, ObjectId, Power, Predicate, RegionId, SceneRegistry, SceneState,
};

use super::{FiredEvent, SimError};

/// Imperfection of the low-level executor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Probability that a primitive whose preconditions hold takes effect.
    pub success_prob: f64,
    /// Probability that a stochastic failure also drops the held object on the floor.
    pub drop_prob: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { success_prob: 1.0, drop_prob: 0.02 }
    }
}

impl NoiseConfig {
    pub fn perfect() -> Self {
        Self { success_prob: 1.0, drop_prob: 0.0 }
    }

    pub fn benchmark() -> Self {
        Self { success_prob: 0.9, drop_prob: 0.02 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Applied,
    FailedPrecondition,
    FailedStochastic,
}

/// A precondition that was not met.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirement {
    Holds(Predicate),
    Articulated(FixtureId),
    PowerSwitch(FixtureId),
    Receptacle(RegionId),
    Capacity(Location),
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirement::Holds(p) => write!(f, "{p}"),
            Requirement::Articulated(x) => write!(f, "Articulated({x})"),
            Requirement::PowerSwitch(x) => write!(f, "PowerSwitch({x})"),
            Requirement::Receptacle(r) => write!(f, "Receptacle({r})"),
            Requirement::Capacity(l) => write!(f, "Capacity({l})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub status: StepStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated: Option<Requirement>,
    /// Object knocked to the floor by a stochastic failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<FiredEvent>,
}

impl StepOutcome {
    pub fn applied(&self) -> bool {
        self.status == StepStatus::Applied
    }
}

fn holds(p: Predicate) -> Result<(), Requirement> {
    Err(Requirement::Holds(p))
}

/// Rejects unknown ids and malformed arity before anything else is looked at.
pub(crate) fn check_ids(state: &SceneState, a: &PrimitiveAction) -> Result<(), SimError> {
    a.check(true)?;
    if let Some(o) = &a.object {
        if !state.placements.contains_key(o) {
            return Err(SimError::UnknownId(o.to_string()));
        }
    }
    if let Some(f) = &a.fixture {
        if !state.fixtures.contains_key(f) {
            return Err(SimError::UnknownId(f.to_string()));
        }
    }
    for loc in [&a.source, &a.target].into_iter().flatten() {
        match loc {
            Location::AtRegion(r) if !state.has_region(r) => return Err(SimError::UnknownId(r.to_string())),
            Location::InsideFixture(f) if !state.fixtures.contains_key(f) => {
                return Err(SimError::UnknownId(f.to_string()))
            }
            _ => {}
        }
    }
    Ok(())
}

fn room_at(registry: &SceneRegistry, state: &SceneState, loc: &Location) -> Result<(), Requirement> {
    if let Some(cap) = registry.capacity(loc) {
        if state.occupants(loc) >= cap as usize {
            return Err(Requirement::Capacity(loc.clone()));
        }
    }
    Ok(())
}

fn put_down(
    registry: &SceneRegistry,
    state: &SceneState,
    obj: &ObjectId,
    target: &Location,
) -> Result<(), Requirement> {
    if state.location(obj) != Some(&Location::InGripper) {
        return holds(Predicate::Holding(obj.clone()));
    }
    if let Location::InsideFixture(f) = target {
        let fx = &state.fixtures[f];
        if !fx.container {
            return Err(Requirement::Articulated(f.clone()));
        }
        if !fx.is_open() {
            return holds(Predicate::Open(f.clone()));
        }
    }
    room_at(registry, state, target)
}

/// The first unmet precondition of `a`, if any. Ids must already be checked.
pub fn precondition(registry: &SceneRegistry, state: &SceneState, a: &PrimitiveAction) -> Result<(), Requirement> {
    let obj = a.object.as_ref();
    match a.action {
        ActionType::Pick => {
            let obj = obj.expect("checked arity");
            let src = a.source.as_ref().expect("checked arity");
            if state.held().is_some() {
                return holds(Predicate::GripperEmpty);
            }
            if let Location::InsideFixture(f) = src {
                if !state.fixtures[f].is_open() {
                    return holds(Predicate::Open(f.clone()));
                }
            }
            if state.location(obj) != Some(src) {
                return holds(match src {
                    Location::AtRegion(r) => Predicate::AtRegion(obj.clone(), r.clone()),
                    Location::InsideFixture(f) => Predicate::Inside(obj.clone(), f.clone()),
                    Location::InGripper => Predicate::Holding(obj.clone()),
                });
            }
            Ok(())
        }
        ActionType::Place | ActionType::Return | ActionType::Store => {
            put_down(registry, state, obj.expect("checked arity"), a.target.as_ref().expect("checked arity"))
        }
        ActionType::Pour => {
            let obj = obj.expect("checked arity");
            if state.location(obj) != Some(&Location::InGripper) {
                return holds(Predicate::Holding(obj.clone()));
            }
            let r = a.target.as_ref().and_then(Location::region).expect("checked arity");
            if !registry.region(r).is_some_and(|r| r.receptacle) {
                return Err(Requirement::Receptacle(r.clone()));
            }
            Ok(())
        }
        ActionType::Open | ActionType::Close => {
            let f = a.fixture.as_ref().expect("checked arity");
            let fx = &state.fixtures[f];
            if fx.articulation == Articulation::Fixed {
                return Err(Requirement::Articulated(f.clone()));
            }
            match (a.action, fx.articulation) {
                (ActionType::Open, Articulation::Closed) => Ok(()),
                (ActionType::Open, _) => holds(Predicate::Closed(f.clone())),
                (_, Articulation::Open) => Ok(()),
                _ => holds(Predicate::Open(f.clone())),
            }
        }
        ActionType::Turn | ActionType::Press => {
            let f = a.fixture.as_ref().expect("checked arity");
            if state.fixtures[f].power == Power::None {
                return Err(Requirement::PowerSwitch(f.clone()));
            }
            Ok(())
        }
        ActionType::Push => {
            let obj = obj.expect("checked arity");
            let src = a.source.as_ref().expect("checked arity");
            if state.held().is_some() {
                return holds(Predicate::GripperEmpty);
            }
            if state.location(obj) != Some(src) {
                let r = src.region().expect("checked arity").clone();
                return holds(Predicate::AtRegion(obj.clone(), r));
            }
            room_at(registry, state, a.target.as_ref().expect("checked arity"))
        }
        ActionType::Move | ActionType::Wait => Ok(()),
    }
}

/// Applies the effect of an action whose preconditions hold.
pub(crate) fn apply_effect(state: &mut SceneState, a: &PrimitiveAction) {
    match a.action {
        ActionType::Pick => {
            let obj = a.object.clone().expect("checked arity");
            state.placements.insert(obj, Location::InGripper);
        }
        ActionType::Place | ActionType::Return | ActionType::Store | ActionType::Push => {
            let obj = a.object.clone().expect("checked arity");
            state.placements.insert(obj, a.target.clone().expect("checked arity"));
        }
        ActionType::Pour => {
            let obj = a.object.clone().expect("checked arity");
            let r = a.target.as_ref().and_then(Location::region).cloned().expect("checked arity");
            state.poured.push((obj, r));
        }
        ActionType::Open | ActionType::Close => {
            let f = a.fixture.as_ref().expect("checked arity");
            let fx = state.fixtures.get_mut(f).expect("checked ids");
            fx.articulation = if a.action == ActionType::Open { Articulation::Open } else { Articulation::Closed };
        }
        ActionType::Turn | ActionType::Press => {
            let f = a.fixture.as_ref().expect("checked arity");
            let fx = state.fixtures.get_mut(f).expect("checked ids");
            fx.power = fx.power.toggled();
        }
        ActionType::Move | ActionType::Wait => {}
    }
}

/// One transition of the symbolic executor.
///
/// The clock advances by one whatever the status. A stochastic failure leaves
/// the state unchanged except for a possible drop of the held object, which is
/// reported in [`StepOutcome::dropped`].
pub fn step<R: Rng + ?Sized>(
    registry: &SceneRegistry,
    state: &SceneState,
    a: &PrimitiveAction,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<(SceneState, StepOutcome), SimError> {
    check_ids(state, a)?;
    let mut next = state.clone();
    let outcome = step_in_place(registry, &mut next, a, noise, rng);
    Ok((next, outcome))
}

pub(crate) fn step_in_place<R: Rng + ?Sized>(
    registry: &SceneRegistry,
    state: &mut SceneState,
    a: &PrimitiveAction,
    noise: &NoiseConfig,
    rng: &mut R,
) -> StepOutcome {
    state.clock += 1;
    if let Err(req) = precondition(registry, state, a) {
        return StepOutcome {
            status: StepStatus::FailedPrecondition,
            violated: Some(req),
            dropped: None,
            events: Vec::new(),
        };
    }
    let roll: f64 = rng.random();
    if roll < noise.success_prob {
        apply_effect(state, a);
        return StepOutcome { status: StepStatus::Applied, violated: None, dropped: None, events: Vec::new() };
    }
    let mut dropped = None;
    if let Some(held) = state.held().cloned() {
        let drop_roll: f64 = rng.random();
        if drop_roll < noise.drop_prob {
            state.placements.insert(held.clone(), Location::AtRegion(registry.floor_region.clone()));
            dropped = Some(held);
        }
    }
    StepOutcome { status: StepStatus::FailedStochastic, violated: None, dropped, events: Vec::new() }
}
