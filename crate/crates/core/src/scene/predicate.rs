use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FixtureId, Location, ObjectId, Power, RegionId, SceneError, SceneState};

/// A testable condition over a [`SceneState`].
///
/// Evaluation reads true state, including the contents of closed containers.
/// What an agent can *see* is decided by the observation model, not here.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    AtRegion(ObjectId, RegionId),
    Inside(ObjectId, FixtureId),
    Open(FixtureId),
    Closed(FixtureId),
    Holding(ObjectId),
    GripperEmpty,
    PoweredOn(FixtureId),
    EmptyContainer(FixtureId),
}

impl Predicate {
    pub fn objects(&self) -> Vec<&ObjectId> {
        match self {
            Predicate::AtRegion(o, _) | Predicate::Inside(o, _) | Predicate::Holding(o) => vec![o],
            _ => Vec::new(),
        }
    }

    pub fn fixtures(&self) -> Vec<&FixtureId> {
        match self {
            Predicate::Inside(_, f)
            | Predicate::Open(f)
            | Predicate::Closed(f)
            | Predicate::PoweredOn(f)
            | Predicate::EmptyContainer(f) => vec![f],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::AtRegion(o, r) => write!(f, "AtRegion({o}, {r})"),
            Predicate::Inside(o, x) => write!(f, "Inside({o}, {x})"),
            Predicate::Open(x) => write!(f, "Open({x})"),
            Predicate::Closed(x) => write!(f, "Closed({x})"),
            Predicate::Holding(o) => write!(f, "Holding({o})"),
            Predicate::GripperEmpty => f.write_str("GripperEmpty"),
            Predicate::PoweredOn(x) => write!(f, "PoweredOn({x})"),
            Predicate::EmptyContainer(x) => write!(f, "EmptyContainer({x})"),
        }
    }
}

fn object<'a>(state: &'a SceneState, o: &ObjectId) -> Result<&'a Location, SceneError> {
    state.placements.get(o).ok_or_else(|| SceneError::UnknownId(o.to_string()))
}

fn fixture<'a>(state: &'a SceneState, x: &FixtureId) -> Result<&'a super::FixtureState, SceneError> {
    state.fixtures.get(x).ok_or_else(|| SceneError::UnknownId(x.to_string()))
}

pub fn eval_predicate(state: &SceneState, p: &Predicate) -> Result<bool, SceneError> {
    Ok(match p {
        Predicate::AtRegion(o, r) => {
            if !state.has_region(r) {
                return Err(SceneError::UnknownId(r.to_string()));
            }
            matches!(object(state, o)?, Location::AtRegion(at) if at == r)
        }
        Predicate::Inside(o, x) => {
            fixture(state, x)?;
            matches!(object(state, o)?, Location::InsideFixture(at) if at == x)
        }
        Predicate::Open(x) => fixture(state, x)?.is_open(),
        Predicate::Closed(x) => fixture(state, x)?.is_closed(),
        Predicate::Holding(o) => *object(state, o)? == Location::InGripper,
        Predicate::GripperEmpty => state.held().is_none(),
        Predicate::PoweredOn(x) => fixture(state, x)?.power == Power::On,
        Predicate::EmptyContainer(x) => {
            fixture(state, x)?;
            !state.placements.values().any(|l| matches!(l, Location::InsideFixture(at) if at == x))
        }
    })
}

/// A non-empty conjunction of predicates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Predicate>", into = "Vec<Predicate>")]
pub struct PredicateSet(Vec<Predicate>);

impl PredicateSet {
    pub fn new(members: Vec<Predicate>) -> Result<Self, SceneError> {
        if members.is_empty() {
            return Err(SceneError::EmptyPredicateSet);
        }
        Ok(Self(members))
    }

    pub fn single(p: Predicate) -> Self {
        Self(vec![p])
    }

    pub fn members(&self) -> &[Predicate] {
        &self.0
    }
}

impl TryFrom<Vec<Predicate>> for PredicateSet {
    type Error = SceneError;

    fn try_from(v: Vec<Predicate>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<PredicateSet> for Vec<Predicate> {
    fn from(s: PredicateSet) -> Self {
        s.0
    }
}

impl fmt::Display for PredicateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

/// Every member is evaluated so that an unknown id anywhere in the set is reported,
/// even when an earlier conjunct is already false.
pub fn eval_set(state: &SceneState, ps: &PredicateSet) -> Result<bool, SceneError> {
    let mut all = true;
    for p in ps.members() {
        all &= eval_predicate(state, p)?;
    }
    Ok(all)
}
