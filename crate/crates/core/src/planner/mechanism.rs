use serde::{Deserialize, Serialize};

use crate::forge::{PrimitiveAction, Subgoal, TaskSpec};
use crate::scene::{FixtureId, Location};
use crate::sim::{expand, Env, SimError};

use super::PlannerError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub success: bool,
    /// The complete generated sub-plan.
    pub sub_plan: Vec<Subgoal>,
    /// The prefix actually executed before the goal condition held.
    pub executed: Vec<Subgoal>,
    pub opened: usize,
    pub located: Option<FixtureId>,
}

/// Task-aware memory phase: derive the goal condition (the target's location
/// is observed), generate an open/close sweep over the candidate containers in
/// `order` (declaration order by default), and execute it step by step,
/// stopping at the first successful step after which the goal condition holds.
pub fn run_memory_mechanism(
    task: &TaskSpec,
    env: &mut Env,
    order: Option<&[FixtureId]>,
) -> Result<MechanismOutcome, PlannerError> {
    if !task.category.needs_memory() {
        return Err(PlannerError::NotMemoryTask);
    }
    let spec = task.memory.as_ref().ok_or(PlannerError::NotMemoryTask)?;
    let goal = |env: &Env| -> Option<FixtureId> {
        match env.observe().location_of(&spec.target)? {
            Location::InsideFixture(f) => Some(f.clone()),
            _ => None,
        }
    };
    let order = order.map(<[_]>::to_vec).unwrap_or_else(|| spec.candidates.clone());
    let sub_plan: Vec<Subgoal> = order
        .iter()
        .flat_map(|c| [PrimitiveAction::open(c.clone()).into(), PrimitiveAction::close(c.clone()).into()])
        .collect();

    let mut out =
        MechanismOutcome { success: false, sub_plan: sub_plan.clone(), executed: Vec::new(), opened: 0, located: None };
    if let Some(f) = goal(env) {
        out.success = true;
        out.located = Some(f);
        return Ok(out);
    }
    for sg in sub_plan {
        let prims = expand(&sg, &env.observe(), None).map_err(|e| PlannerError::MalformedPlan(e.to_string()))?;
        let mut ok = true;
        for p in &prims {
            match env.step(p, 0) {
                Ok(o) => ok &= o.applied(),
                Err(SimError::UnknownId(id)) => return Err(PlannerError::MalformedPlan(format!("unknown id {id}"))),
                Err(e) => return Err(PlannerError::MalformedPlan(e.to_string())),
            }
        }
        if ok && sg.action == crate::forge::ActionType::Open {
            out.opened += 1;
        }
        out.executed.push(sg);
        if ok {
            if let Some(f) = goal(env) {
                out.success = true;
                out.located = Some(f);
                return Ok(out);
            }
        }
    }
    Ok(out)
}
