use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scene::{eval_set, validate_scene, Location, PredicateSet, SceneError, SceneState};
use crate::sim::{self, NoiseConfig, Requirement, SimError, StepStatus};

use super::{compile_scene, TaskSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepFault {
    Precondition(Requirement),
    Malformed(String),
    UnknownId(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFailure {
    pub index: usize,
    pub step: String,
    pub fault: StepFault,
}

impl StepFailure {
    pub fn requirement(&self) -> Option<&Requirement> {
        match &self.fault {
            StepFault::Precondition(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub step_failures: Vec<StepFailure>,
    pub state_inconsistencies: Vec<String>,
    /// Number of plan steps executed when each key transition first held.
    pub transition_steps: Vec<Option<usize>>,
}

/// Advances the ordered-achievement counter over every transition that holds
/// in `state`. Returns how many fired.
pub fn advance_achieved(
    state: &SceneState,
    transitions: &[PredicateSet],
    achieved: &mut usize,
) -> Result<usize, SceneError> {
    let start = *achieved;
    while *achieved < transitions.len() && eval_set(state, &transitions[*achieved])? {
        *achieved += 1;
    }
    Ok(*achieved - start)
}

/// The noise-free, perturbation-free execution of the ground-truth plan, with
/// every subgoal run directly as a primitive.
#[derive(Clone, Debug)]
pub struct ReferenceRun {
    /// `states[i]` is the state after `i` plan steps.
    pub states: Vec<SceneState>,
    pub failures: Vec<StepFailure>,
    pub transition_steps: Vec<Option<usize>>,
    pub errors: Vec<String>,
}

pub fn reference_run(task: &TaskSpec, initial: SceneState) -> ReferenceRun {
    let reg = task.registry();
    let k = task.key_transitions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = initial;
    let mut states = vec![state.clone()];
    let mut failures = Vec::new();
    let mut errors = Vec::new();
    let mut steps = vec![None; k];
    let mut achieved = 0;

    let mut track = |state: &SceneState, i: usize, achieved: &mut usize, errors: &mut Vec<String>| {
        let before = *achieved;
        match advance_achieved(state, &task.key_transitions, achieved) {
            Ok(_) => {
                for slot in &mut steps[before..*achieved] {
                    *slot = Some(i);
                }
            }
            Err(e) => errors.push(format!("key transition {}: {e}", *achieved + 1)),
        }
    };
    track(&state, 0, &mut achieved, &mut errors);

    for (i, sg) in task.gt_plan.iter().enumerate() {
        let a = sg.canonical();
        let fault = match sim::step(reg, &state, &a, &NoiseConfig::perfect(), &mut rng) {
            Ok((next, out)) => {
                state = next;
                match out.status {
                    StepStatus::Applied => None,
                    _ => out.violated.map(StepFault::Precondition),
                }
            }
            Err(SimError::UnknownId(id)) => {
                state.clock += 1;
                Some(StepFault::UnknownId(id))
            }
            Err(e) => {
                state.clock += 1;
                Some(StepFault::Malformed(e.to_string()))
            }
        };
        if let Some(fault) = fault {
            failures.push(StepFailure { index: i, step: sg.text.clone(), fault });
        }
        for v in validate_scene(&state, reg).violations {
            errors.push(format!("after step {i}: {v}"));
        }
        track(&state, i + 1, &mut achieved, &mut errors);
        states.push(state.clone());
    }
    ReferenceRun { states, failures, transition_steps: steps, errors }
}

/// Executes `gt_plan` from the compiled scene with a perfect executor and
/// checks that every key transition fires in order.
pub fn verify_task(task: &TaskSpec) -> VerificationReport {
    let mut inconsistencies = task.check_invariants();
    let initial = match compile_scene(task) {
        Ok(s) => s,
        Err(e) => {
            inconsistencies.push(e.to_string());
            return VerificationReport {
                passed: false,
                step_failures: Vec::new(),
                state_inconsistencies: inconsistencies,
                transition_steps: vec![None; task.key_transitions.len()],
            };
        }
    };
    if let Some(m) = task.memory.as_ref().filter(|_| task.category.explores()) {
        let holding: Vec<_> = m
            .candidates
            .iter()
            .filter(|c| initial.location(&m.target) == Some(&Location::InsideFixture((*c).clone())))
            .collect();
        if holding.len() != 1 {
            inconsistencies.push(format!("target {} is not inside exactly one candidate", m.target));
        }
    }
    let run = reference_run(task, initial);
    inconsistencies.extend(run.errors);
    for (k, at) in run.transition_steps.iter().enumerate() {
        if at.is_none() {
            inconsistencies.push(format!("key transition {} unachieved", k + 1));
        }
    }
    VerificationReport {
        passed: run.failures.is_empty() && inconsistencies.is_empty(),
        step_failures: run.failures,
        state_inconsistencies: inconsistencies,
        transition_steps: run.transition_steps,
    }
}
