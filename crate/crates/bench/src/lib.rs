//! Fixtures shared by the criterion benchmarks in `benches/`.

use hsim_core::forge::{default_counts, emit_suite};
use hsim_core::{Location, PrimitiveAction, SceneRegistry, TaskSpec};

/// The default 60-task suite for `seed`.
pub fn default_suite(seed: u64) -> Vec<TaskSpec> {
    emit_suite(&SceneRegistry::kitchen(), &default_counts(), seed).expect("default suite generates")
}

/// A pick/place round trip that leaves the kitchen in its initial state.
pub fn pick_place_cycle() -> Vec<PrimitiveAction> {
    let counter = Location::AtRegion("counter_top".into());
    let table = Location::AtRegion("dining_table_top".into());
    vec![
        PrimitiveAction::pick("plate", counter.clone()),
        PrimitiveAction::place("plate", table.clone()),
        PrimitiveAction::pick("plate", table),
        PrimitiveAction::place("plate", counter),
    ]
}
