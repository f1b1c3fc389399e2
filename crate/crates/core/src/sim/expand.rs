use crate::forge::{ActionType, PrimitiveAction, Subgoal};
use crate::scene::Location;

use super::{Observation, SimError};

fn reopen(obs: &Observation, loc: &Location, out: &mut Vec<PrimitiveAction>) {
    if let Location::InsideFixture(f) = loc {
        if obs.is_open(f) != Some(true) {
            out.push(PrimitiveAction::open(f.clone()));
        }
    }
}

/// The primitives a perfect low-level executor would attempt for `subgoal`,
/// judged from what it currently observes.
///
/// An explicit source in the subgoal wins; otherwise the observed location is
/// used, then the memory hint.
pub fn expand(subgoal: &Subgoal, obs: &Observation, hint: Option<&Location>) -> Result<Vec<PrimitiveAction>, SimError> {
    let unexpandable = || SimError::Unexpandable(subgoal.text.clone());
    subgoal.check(false)?;
    let mut out = Vec::new();
    let a = subgoal.canonical();
    match a.action {
        ActionType::Pick => {
            let obj = a.object.clone().expect("checked arity");
            let src = a
                .source
                .clone()
                .or_else(|| obs.location_of(&obj).cloned())
                .or_else(|| hint.cloned())
                .filter(|l| *l != Location::InGripper)
                .ok_or_else(unexpandable)?;
            reopen(obs, &src, &mut out);
            out.push(PrimitiveAction::pick(obj, src));
        }
        ActionType::Store => {
            let target = a.target.clone().ok_or_else(unexpandable)?;
            reopen(obs, &target, &mut out);
            out.push(a);
        }
        ActionType::Place | ActionType::Return | ActionType::Pour => {
            let target = a.target.clone().ok_or_else(unexpandable)?;
            match &target {
                Location::InsideFixture(_) => reopen(obs, &target, &mut out),
                _ => out.push(PrimitiveAction::move_to(target)),
            }
            out.push(a);
        }
        ActionType::Open | ActionType::Close | ActionType::Turn | ActionType::Press => {
            if a.fixture.is_none() {
                return Err(unexpandable());
            }
            out.push(a);
        }
        ActionType::Push | ActionType::Move | ActionType::Wait => out.push(a),
    }
    Ok(out)
}
