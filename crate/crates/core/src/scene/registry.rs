use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Articulation, FixtureId, FixtureState, Location, ObjectId, Power, RegionId, SceneError, SceneState};

const KITCHEN_JSON: &str = include_str!("../../assets/kitchen.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub id: RegionId,
    /// Maximum number of objects; `None` is unbounded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
    /// Can receive a pour.
    #[serde(default)]
    pub receptacle: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSpec {
    pub id: FixtureId,
    pub articulation: Articulation,
    #[serde(default = "no_power")]
    pub power: Power,
    #[serde(default)]
    pub container: bool,
    /// Interior capacity for containers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
}

fn no_power() -> Power {
    Power::None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: ObjectId,
    #[serde(default)]
    pub tags: Vec<String>,
    pub initial: Location,
    /// Free-form affordance labels. Carried as metadata only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub affordances: Vec<String>,
}

impl ObjectSpec {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.tags.iter().any(|t| t == tag)
    }
}

/// Declares the fixtures, regions and objects of a scene plus their initial placements.
///
/// Declaration order is significant: container fixtures are swept in the order
/// they appear here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRegistry {
    pub name: String,
    /// Reserved region that receives dropped objects.
    pub floor_region: RegionId,
    pub fixtures: Vec<FixtureSpec>,
    pub objects: Vec<ObjectSpec>,
}

impl SceneRegistry {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let reg: SceneRegistry = serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        reg.check_declarations()?;
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The built-in kitchen scene shipped with the crate.
    pub fn kitchen() -> Self {
        Self::from_json(KITCHEN_JSON).expect("bundled kitchen registry is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }

    fn check_declarations(&self) -> Result<(), SceneError> {
        let mut seen = BTreeSet::new();
        for f in &self.fixtures {
            if !seen.insert(f.id.as_str()) {
                return Err(SceneError::Duplicate(f.id.to_string()));
            }
            for r in &f.regions {
                if !seen.insert(r.id.as_str()) {
                    return Err(SceneError::Duplicate(r.id.to_string()));
                }
            }
        }
        for o in &self.objects {
            if !seen.insert(o.id.as_str()) {
                return Err(SceneError::Duplicate(o.id.to_string()));
            }
        }
        if self.region(&self.floor_region).is_none() {
            return Err(SceneError::UnknownId(self.floor_region.to_string()));
        }
        Ok(())
    }

    pub fn fixture(&self, id: &FixtureId) -> Option<&FixtureSpec> {
        self.fixtures.iter().find(|f| &f.id == id)
    }

    pub fn region(&self, id: &RegionId) -> Option<&RegionSpec> {
        self.fixtures.iter().flat_map(|f| f.regions.iter()).find(|r| &r.id == id)
    }

    pub fn region_owner(&self, id: &RegionId) -> Option<&FixtureSpec> {
        self.fixtures.iter().find(|f| f.regions.iter().any(|r| &r.id == id))
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn containers(&self) -> impl Iterator<Item = &FixtureSpec> {
        self.fixtures.iter().filter(|f| f.container)
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionSpec> {
        self.fixtures.iter().flat_map(|f| f.regions.iter())
    }

    /// Capacity of a location; `None` when unbounded or not a placement slot.
    pub fn capacity(&self, loc: &Location) -> Option<u32> {
        match loc {
            Location::AtRegion(r) => self.region(r).and_then(|r| r.capacity),
            Location::InsideFixture(f) => self.fixture(f).and_then(|f| f.capacity),
            Location::InGripper => Some(1),
        }
    }

    pub fn location_declared(&self, loc: &Location) -> bool {
        match loc {
            Location::AtRegion(r) => self.region(r).is_some(),
            Location::InsideFixture(f) => self.fixture(f).is_some_and(|f| f.container),
            Location::InGripper => true,
        }
    }

    /// Whether a bare identifier names a region, a fixture, or an object.
    pub fn kind_of(&self, id: &str) -> Option<IdKind> {
        if self.fixtures.iter().any(|f| f.id.as_str() == id) {
            Some(IdKind::Fixture)
        } else if self.regions().any(|r| r.id.as_str() == id) {
            Some(IdKind::Region)
        } else if self.objects.iter().any(|o| o.id.as_str() == id) {
            Some(IdKind::Object)
        } else {
            None
        }
    }

    pub fn initial_state(&self) -> SceneState {
        let fixtures: BTreeMap<FixtureId, FixtureState> = self
            .fixtures
            .iter()
            .map(|f| {
                (
                    f.id.clone(),
                    FixtureState {
                        articulation: f.articulation,
                        power: f.power,
                        regions: f.regions.iter().map(|r| r.id.clone()).collect(),
                        container: f.container,
                    },
                )
            })
            .collect();
        let placements = self.objects.iter().map(|o| (o.id.clone(), o.initial.clone())).collect();
        SceneState { fixtures, placements, poured: Vec::new(), clock: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdKind {
    Fixture,
    Region,
    Object,
}
