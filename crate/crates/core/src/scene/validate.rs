use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Articulation, Location, SceneRegistry, SceneState};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    MultipleHeld { objects: Vec<String> },
    UndeclaredObject { object: String },
    MissingPlacement { object: String },
    UndeclaredLocation { object: String, location: Location },
    NotAContainer { object: String, fixture: String },
    UndeclaredFixture { fixture: String },
    MissingFixture { fixture: String },
    RegionMismatch { fixture: String },
    ContainerNotArticulated { fixture: String },
    FixedArticulationChanged { fixture: String },
    OverCapacity { location: Location, occupants: usize, capacity: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MultipleHeld { objects } => {
                write!(f, "more than one object held: {}", objects.join(", "))
            }
            Violation::UndeclaredObject { object } => write!(f, "object {object} not in registry"),
            Violation::MissingPlacement { object } => write!(f, "object {object} has no location"),
            Violation::UndeclaredLocation { object, location } => {
                write!(f, "object {object} placed at undeclared location {location}")
            }
            Violation::NotAContainer { object, fixture } => {
                write!(f, "object {object} inside non-container fixture {fixture}")
            }
            Violation::UndeclaredFixture { fixture } => write!(f, "fixture {fixture} not in registry"),
            Violation::MissingFixture { fixture } => write!(f, "fixture {fixture} missing from state"),
            Violation::RegionMismatch { fixture } => {
                write!(f, "fixture {fixture} regions differ from registry")
            }
            Violation::ContainerNotArticulated { fixture } => {
                write!(f, "container {fixture} must be open or closed")
            }
            Violation::FixedArticulationChanged { fixture } => {
                write!(f, "fixed fixture {fixture} changed articulation")
            }
            Violation::OverCapacity { location, occupants, capacity } => {
                write!(f, "{location} holds {occupants} objects, capacity {capacity}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a state against its registry and reports every invariant violation found.
pub fn validate_scene(state: &SceneState, registry: &SceneRegistry) -> ValidationReport {
    let mut out = Vec::new();

    let held: Vec<String> =
        state.placements.iter().filter(|(_, l)| **l == Location::InGripper).map(|(o, _)| o.to_string()).collect();
    if held.len() > 1 {
        out.push(Violation::MultipleHeld { objects: held });
    }

    for spec in &registry.fixtures {
        match state.fixtures.get(&spec.id) {
            None => out.push(Violation::MissingFixture { fixture: spec.id.to_string() }),
            Some(fx) => {
                let declared: Vec<_> = spec.regions.iter().map(|r| &r.id).collect();
                if fx.regions.iter().collect::<Vec<_>>() != declared || fx.container != spec.container {
                    out.push(Violation::RegionMismatch { fixture: spec.id.to_string() });
                }
                if fx.container && fx.articulation == Articulation::Fixed {
                    out.push(Violation::ContainerNotArticulated { fixture: spec.id.to_string() });
                }
                if (spec.articulation == Articulation::Fixed) != (fx.articulation == Articulation::Fixed) {
                    out.push(Violation::FixedArticulationChanged { fixture: spec.id.to_string() });
                }
            }
        }
    }
    for id in state.fixtures.keys() {
        if registry.fixture(id).is_none() {
            out.push(Violation::UndeclaredFixture { fixture: id.to_string() });
        }
    }

    for spec in &registry.objects {
        if !state.placements.contains_key(&spec.id) {
            out.push(Violation::MissingPlacement { object: spec.id.to_string() });
        }
    }

    let mut occupancy: BTreeMap<&Location, usize> = BTreeMap::new();
    for (obj, loc) in &state.placements {
        if registry.object(obj).is_none() {
            out.push(Violation::UndeclaredObject { object: obj.to_string() });
        }
        match loc {
            Location::AtRegion(r) if registry.region(r).is_none() => {
                out.push(Violation::UndeclaredLocation { object: obj.to_string(), location: loc.clone() });
            }
            Location::InsideFixture(f) => match registry.fixture(f) {
                None => out.push(Violation::UndeclaredLocation { object: obj.to_string(), location: loc.clone() }),
                Some(spec) if !spec.container => {
                    out.push(Violation::NotAContainer { object: obj.to_string(), fixture: f.to_string() })
                }
                _ => {}
            },
            _ => {}
        }
        *occupancy.entry(loc).or_default() += 1;
    }
    for (loc, n) in occupancy {
        if *loc == Location::InGripper {
            continue;
        }
        if let Some(cap) = registry.capacity(loc) {
            if n > cap as usize {
                out.push(Violation::OverCapacity { location: loc.clone(), occupants: n, capacity: cap });
            }
        }
    }

    ValidationReport { violations: out }
}
