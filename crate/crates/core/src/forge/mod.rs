//! Task generation, scene compilation and symbolic verification.

mod action;
mod compile;
mod generate;
mod suite;
mod task;
mod verify;

use thiserror::Error;

pub use action::{ActionError, ActionType, PrimitiveAction, Subgoal};
pub use compile::compile_scene;
pub use generate::{generate_task, Template, TemplateLibrary, MAX_ATTEMPTS};
pub use suite::{default_counts, emit_suite, load_suite, write_suite, SuiteEntry, SuiteManifest, DEFAULT_PER_CATEGORY};
pub use task::{
    BinaryQuestion, Category, MemorySpec, PlacementConstraint, SceneSpec, StaleBelief, TaskSpec, MAX_PLAN_LEN,
    MIN_PLAN_LEN,
};
pub use verify::{
    advance_achieved, reference_run, verify_task, ReferenceRun, StepFailure, StepFault, VerificationReport,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ForgeError {
    #[error("no valid {category} task after {attempts} attempts")]
    GenerationExhausted { category: Category, attempts: usize },
    #[error("unsatisfiable placement: {0}")]
    UnsatisfiableConstraint(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("invalid task: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
