//! Symbolic executor: transition function, noisy low-level proxy, perturbations
//! and the observation model.

mod env;
mod expand;
mod observe;
mod perturb;
mod step;

use thiserror::Error;

use crate::forge::ActionError;
use crate::scene::SceneError;

pub use env::Env;
pub use expand::expand;
pub use observe::{observe, FixtureView, Observation, ObservationMode, Staleness};
pub use perturb::{inject, FiredEvent, PerturbationEvent, PerturbationKind, PerturbationSchedule, Trigger};
pub use step::{precondition, step, NoiseConfig, Requirement, StepOutcome, StepStatus};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error(transparent)]
    MalformedAction(#[from] ActionError),
    #[error("no location hypothesis for `{0}`")]
    Unexpandable(String),
}

impl From<SceneError> for SimError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::UnknownId(id) => SimError::UnknownId(id),
            other => SimError::UnknownId(other.to_string()),
        }
    }
}
