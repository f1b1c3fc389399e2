use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::forge::{ActionType, PrimitiveAction};
use crate::scene::{Articulation, FixtureId, Location, ObjectId, Power, RegionId, SceneState};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    /// Every placement, including closed-container contents.
    Full,
    /// Closed-container contents are omitted.
    Partial,
    /// Partial, and the listed objects report their stale location while one exists.
    Mismatch(BTreeSet<ObjectId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureView {
    pub articulation: Articulation,
    pub power: Power,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub visible_placements: BTreeMap<ObjectId, Location>,
    pub fixture_states: BTreeMap<FixtureId, FixtureView>,
    pub gripper: Option<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub poured: Vec<(ObjectId, RegionId)>,
    pub clock: u64,
}

impl Observation {
    /// What a planner without vision receives.
    pub fn empty() -> Self {
        Self {
            visible_placements: BTreeMap::new(),
            fixture_states: BTreeMap::new(),
            gripper: None,
            poured: Vec::new(),
            clock: 0,
        }
    }

    pub fn location_of(&self, obj: &ObjectId) -> Option<&Location> {
        self.visible_placements.get(obj)
    }

    pub fn is_open(&self, f: &FixtureId) -> Option<bool> {
        self.fixture_states.get(f).map(|v| v.articulation == Articulation::Open)
    }

    /// Short content hash used in traces.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("observation serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

/// Last-known locations that the observer still believes after silent changes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Staleness {
    entries: BTreeMap<ObjectId, Location>,
}

impl Staleness {
    /// Keeps the oldest belief if the object is already stale.
    pub fn mark(&mut self, obj: ObjectId, believed: Location) {
        self.entries.entry(obj).or_insert(believed);
    }

    pub fn get(&self, obj: &ObjectId) -> Option<&Location> {
        self.entries.get(obj)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Clears beliefs the action disproves: any action naming a stale object, and
    /// opening the container that truly holds one.
    pub fn on_action(&mut self, state: &SceneState, a: &PrimitiveAction, applied: bool) {
        if let Some(o) = &a.object {
            self.entries.remove(o);
        }
        if applied && a.action == ActionType::Open {
            if let Some(f) = &a.fixture {
                let opened = Location::InsideFixture(f.clone());
                self.entries.retain(|o, _| state.placements.get(o) != Some(&opened));
            }
        }
    }
}

pub fn observe(state: &SceneState, mode: &ObservationMode, staleness: &Staleness) -> Observation {
    let hidden = |loc: &Location| match loc {
        Location::InsideFixture(f) => !state.fixtures.get(f).is_some_and(|x| x.is_open()),
        _ => false,
    };
    let mut visible = BTreeMap::new();
    let mut gripper = None;
    for (obj, truth) in &state.placements {
        let shown = match mode {
            ObservationMode::Full => Some(truth),
            ObservationMode::Partial => (!hidden(truth)).then_some(truth),
            ObservationMode::Mismatch(set) => {
                let loc = match staleness.get(obj) {
                    Some(stale) if set.contains(obj) => stale,
                    _ => truth,
                };
                (!hidden(loc)).then_some(loc)
            }
        };
        if let Some(loc) = shown {
            if *loc == Location::InGripper {
                gripper = Some(obj.clone());
            }
            visible.insert(obj.clone(), loc.clone());
        }
    }
    let fixture_states = state
        .fixtures
        .iter()
        .map(|(id, f)| (id.clone(), FixtureView { articulation: f.articulation, power: f.power }))
        .collect();
    Observation {
        visible_placements: visible,
        fixture_states,
        gripper,
        poured: state.poured.clone(),
        clock: state.clock,
    }
}
