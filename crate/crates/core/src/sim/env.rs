use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::forge::PrimitiveAction;
use crate::scene::{Location, ObjectId, SceneRegistry, SceneState};

use super::observe::{observe, Observation, ObservationMode, Staleness};
use super::perturb::{inject, FiredEvent, PerturbationSchedule};
use super::step::{check_ids, step_in_place, NoiseConfig, StepOutcome};
use super::SimError;

/// One episode's world: true state, executor noise, scheduled perturbations and
/// the observer's stale beliefs. Single writer, owns its RNG stream.
#[derive(Clone, Debug)]
pub struct Env {
    registry: Arc<SceneRegistry>,
    state: SceneState,
    noise: NoiseConfig,
    mode: ObservationMode,
    schedule: PerturbationSchedule,
    fired: BTreeSet<usize>,
    staleness: Staleness,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(
        registry: Arc<SceneRegistry>,
        state: SceneState,
        noise: NoiseConfig,
        mode: ObservationMode,
        schedule: PerturbationSchedule,
        seed: u64,
    ) -> Self {
        Self {
            registry,
            state,
            noise,
            mode,
            schedule,
            fired: BTreeSet::new(),
            staleness: Staleness::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seeds beliefs that differ from the true initial placement.
    pub fn with_stale_beliefs(mut self, beliefs: impl IntoIterator<Item = (ObjectId, Location)>) -> Self {
        for (o, l) in beliefs {
            self.staleness.mark(o, l);
        }
        self
    }

    pub fn registry(&self) -> &SceneRegistry {
        &self.registry
    }

    pub fn state(&self) -> &SceneState {
        &self.state
    }

    pub fn clock(&self) -> u64 {
        self.state.clock
    }

    pub fn mode(&self) -> &ObservationMode {
        &self.mode
    }

    pub fn staleness(&self) -> &Staleness {
        &self.staleness
    }

    pub fn observe(&self) -> Observation {
        observe(&self.state, &self.mode, &self.staleness)
    }

    pub fn observe_with(&self, mode: &ObservationMode) -> Observation {
        observe(&self.state, mode, &self.staleness)
    }

    /// Fires due perturbations for the current clock and transition count, then
    /// executes `a`.
    pub fn step(&mut self, a: &PrimitiveAction, transitions_achieved: usize) -> Result<StepOutcome, SimError> {
        check_ids(&self.state, a)?;
        let events = self.inject(transitions_achieved);
        let mut outcome = step_in_place(&self.registry, &mut self.state, a, &self.noise, &mut self.rng);
        self.staleness.on_action(&self.state, a, outcome.applied());
        outcome.events = events;
        Ok(outcome)
    }

    pub fn inject(&mut self, transitions_achieved: usize) -> Vec<FiredEvent> {
        let t = self.state.clock;
        inject(
            &self.registry,
            &mut self.state,
            &self.schedule,
            &mut self.fired,
            &mut self.staleness,
            t,
            transitions_achieved,
        )
    }
}
