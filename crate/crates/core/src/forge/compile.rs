use std::collections::BTreeMap;

use crate::scene::{validate_scene, Articulation, Location, SceneState};

use super::{ForgeError, TaskSpec};

/// Realizes the task's initial placements and articulations on top of the
/// registry defaults.
pub fn compile_scene(task: &TaskSpec) -> Result<SceneState, ForgeError> {
    let reg = task.registry();
    let mut state = reg.initial_state();
    for c in &task.scene.placements {
        if reg.object(&c.object).is_none() {
            return Err(ForgeError::UnknownId(c.object.to_string()));
        }
        for loc in std::iter::once(&c.initial).chain(c.goal.as_ref()) {
            if *loc == Location::InGripper || !reg.location_declared(loc) {
                return Err(ForgeError::UnknownId(loc.to_string()));
            }
        }
        state.placements.insert(c.object.clone(), c.initial.clone());
    }
    for (f, art) in &task.scene.articulation {
        let spec = reg.fixture(f).ok_or_else(|| ForgeError::UnknownId(f.to_string()))?;
        if spec.articulation == Articulation::Fixed || *art == Articulation::Fixed {
            return Err(ForgeError::Invalid(format!("{f} is not articulated")));
        }
        state.fixtures.get_mut(f).expect("registry fixture").articulation = *art;
    }
    for b in &task.scene.stale_beliefs {
        if reg.object(&b.object).is_none() {
            return Err(ForgeError::UnknownId(b.object.to_string()));
        }
        if !reg.location_declared(&b.believed) {
            return Err(ForgeError::UnknownId(b.believed.to_string()));
        }
    }

    let mut load: BTreeMap<&Location, usize> = BTreeMap::new();
    for loc in state.placements.values() {
        *load.entry(loc).or_default() += 1;
    }
    for (loc, n) in load {
        if let Some(cap) = reg.capacity(loc) {
            if n > cap as usize {
                return Err(ForgeError::UnsatisfiableConstraint(format!("{n} objects demand {loc} (capacity {cap})")));
            }
        }
    }

    let report = validate_scene(&state, reg);
    if let Some(v) = report.violations.first() {
        return Err(ForgeError::Invalid(v.to_string()));
    }
    Ok(state)
}
