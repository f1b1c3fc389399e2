//! Deterministic symbolic simulator and benchmark harness for long-horizon
//! household manipulation with a pluggable high-level planner.
//!
//! The crate is organized bottom-up:
//!
//! * [`scene`]: world model and predicates
//! * [`forge`]: task generation, scene compilation and symbolic verification
//! * [`sim`]: the noisy primitive executor, perturbations and observations
//! * [`planner`]: planner interface, memory bank and built-in planners
//! * [`orchestrator`]: the anchor-aligned plan/execute loop and batch runs
//! * [`metrics`]: scoring and report rendering

pub mod config;
pub mod forge;
pub mod metrics;
pub mod orchestrator;
pub mod planner;
pub mod scene;
pub mod seed;
pub mod sim;

pub use forge::{ActionType, Category, PrimitiveAction, Subgoal, TaskSpec};
pub use metrics::MetricsReport;
pub use scene::{Location, Predicate, PredicateSet, SceneRegistry, SceneState};
pub use sim::{NoiseConfig, Observation, ObservationMode};
