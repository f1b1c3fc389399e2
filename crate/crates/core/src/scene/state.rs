use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FixtureId, ObjectId, RegionId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Articulation {
    Open,
    Closed,
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Power {
    On,
    Off,
    None,
}

impl Power {
    pub fn toggled(self) -> Power {
        match self {
            Power::On => Power::Off,
            Power::Off => Power::On,
            Power::None => Power::None,
        }
    }
}

/// Dynamic and structural state of one fixture.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureState {
    pub articulation: Articulation,
    pub power: Power,
    pub regions: Vec<RegionId>,
    /// Container fixtures hold objects inside; contents are hidden while closed.
    pub container: bool,
}

impl FixtureState {
    pub fn is_open(&self) -> bool {
        self.articulation == Articulation::Open
    }

    pub fn is_closed(&self) -> bool {
        self.articulation == Articulation::Closed
    }
}

/// Where an object currently is.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    AtRegion(RegionId),
    InsideFixture(FixtureId),
    InGripper,
}

impl Location {
    pub fn region(&self) -> Option<&RegionId> {
        match self {
            Location::AtRegion(r) => Some(r),
            _ => None,
        }
    }

    pub fn fixture(&self) -> Option<&FixtureId> {
        match self {
            Location::InsideFixture(f) => Some(f),
            _ => None,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::AtRegion(r) => write!(f, "{r}"),
            Location::InsideFixture(x) => write!(f, "{x}"),
            Location::InGripper => f.write_str("gripper"),
        }
    }
}

/// Symbolic world snapshot. A plain value: cloning it is the snapshot mechanism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneState {
    pub fixtures: BTreeMap<FixtureId, FixtureState>,
    pub placements: BTreeMap<ObjectId, Location>,
    /// Liquids poured so far, as (source object, receiving region).
    #[serde(default)]
    pub poured: Vec<(ObjectId, RegionId)>,
    pub clock: u64,
}

impl SceneState {
    pub fn held(&self) -> Option<&ObjectId> {
        self.placements.iter().find(|(_, loc)| **loc == Location::InGripper).map(|(id, _)| id)
    }

    pub fn location(&self, obj: &ObjectId) -> Option<&Location> {
        self.placements.get(obj)
    }

    pub fn region_owner(&self, region: &RegionId) -> Option<&FixtureId> {
        self.fixtures.iter().find(|(_, f)| f.regions.contains(region)).map(|(id, _)| id)
    }

    pub fn has_region(&self, region: &RegionId) -> bool {
        self.region_owner(region).is_some()
    }

    /// True when the object sits inside a container that is currently closed.
    pub fn is_enclosed(&self, obj: &ObjectId) -> bool {
        match self.placements.get(obj) {
            Some(Location::InsideFixture(f)) => self.fixtures.get(f).is_some_and(|fx| !fx.is_open()),
            _ => false,
        }
    }

    pub fn occupants(&self, loc: &Location) -> usize {
        self.placements.values().filter(|l| *l == loc).count()
    }

    pub fn location_exists(&self, loc: &Location) -> bool {
        match loc {
            Location::AtRegion(r) => self.has_region(r),
            Location::InsideFixture(f) => self.fixtures.get(f).is_some_and(|fx| fx.container),
            Location::InGripper => true,
        }
    }
}
