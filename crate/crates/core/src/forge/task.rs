use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::orchestrator::AnchorPolicy;
use crate::scene::{Articulation, FixtureId, Location, ObjectId, PredicateSet, SceneRegistry};
use crate::sim::PerturbationSchedule;

use super::{ForgeError, Subgoal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Ideal,
    MemoryExploration,
    MemoryExecution,
    RandomDisturbance,
    ObservationMismatching,
    Mix,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Ideal,
        Category::MemoryExploration,
        Category::MemoryExecution,
        Category::RandomDisturbance,
        Category::ObservationMismatching,
        Category::Mix,
    ];

    /// Column order of the results tables.
    pub const COLUMNS: [Category; 6] = [
        Category::RandomDisturbance,
        Category::ObservationMismatching,
        Category::MemoryExploration,
        Category::MemoryExecution,
        Category::Mix,
        Category::Ideal,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Category::Ideal => "ideal",
            Category::MemoryExploration => "memory_exploration",
            Category::MemoryExecution => "memory_execution",
            Category::RandomDisturbance => "random_disturbance",
            Category::ObservationMismatching => "observation_mismatching",
            Category::Mix => "mix",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Category::Ideal => "Ideal",
            Category::MemoryExploration => "Exp.",
            Category::MemoryExecution => "Exe.",
            Category::RandomDisturbance => "Ran.",
            Category::ObservationMismatching => "Obs.",
            Category::Mix => "Mix",
        }
    }

    /// Prefix of suite task ids.
    pub fn prefix(self) -> &'static str {
        match self {
            Category::Ideal => "ideal",
            Category::MemoryExploration => "exp",
            Category::MemoryExecution => "exe",
            Category::RandomDisturbance => "ran",
            Category::ObservationMismatching => "obs",
            Category::Mix => "mix",
        }
    }

    pub fn needs_memory(self) -> bool {
        matches!(self, Category::MemoryExploration | Category::MemoryExecution | Category::Mix)
    }

    pub fn explores(self) -> bool {
        matches!(self, Category::MemoryExploration | Category::Mix)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Category {
    type Err = ForgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_").to_lowercase();
        Category::ALL
            .into_iter()
            .find(|c| c.slug() == norm || c.prefix() == norm)
            .ok_or_else(|| ForgeError::Invalid(format!("unknown category `{s}`")))
    }
}

/// Where an object starts and, when the task moves it, where it should end up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementConstraint {
    pub object: ObjectId,
    pub initial: Location,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Location>,
}

/// An initial belief that disagrees with the true placement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaleBelief {
    pub object: ObjectId,
    pub believed: Location,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub registry: SceneRegistry,
    #[serde(default)]
    pub placements: Vec<PlacementConstraint>,
    #[serde(default)]
    pub articulation: BTreeMap<FixtureId, Articulation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stale_beliefs: Vec<StaleBelief>,
}

/// A yes/no probe posed to the planner once enough transitions have fired.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryQuestion {
    pub id: String,
    pub text: String,
    pub query: PredicateSet,
    /// Asked at the first anchor at which at least this many key transitions hold.
    pub after_transition: usize,
    /// Answer in the noise-free reference execution; used to balance question sets.
    pub reference_answer: bool,
}

/// Hidden-object bookkeeping for the memory categories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySpec {
    pub target: ObjectId,
    /// Containers that may hold the target, in sweep (declaration) order.
    pub candidates: Vec<FixtureId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_container: Option<FixtureId>,
    pub goal: Location,
    /// Length of the leading exploration sweep in `gt_plan`; zero when none.
    #[serde(default)]
    pub exploration_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub category: Category,
    pub seed: u64,
    /// Carried verbatim for planners; never parsed by the harness.
    pub instruction: String,
    pub gt_plan: Vec<Subgoal>,
    pub key_transitions: Vec<PredicateSet>,
    #[serde(default)]
    pub perturbations: PerturbationSchedule,
    #[serde(default)]
    pub qa_set: Vec<BinaryQuestion>,
    pub anchor_policy: AnchorPolicy,
    pub scene: SceneSpec,
    /// Indices of `gt_plan` steps whose location slots are withheld from
    /// non-oracle planners, which must ground them from observation or memory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grounding: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemorySpec>,
}

pub const MIN_PLAN_LEN: usize = 2;
pub const MAX_PLAN_LEN: usize = 25;

impl TaskSpec {
    pub fn registry(&self) -> &SceneRegistry {
        &self.scene.registry
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ForgeError> {
        serde_json::from_str(text).map_err(|e| ForgeError::Parse(e.to_string()))
    }

    /// The exploration prefix of the ground-truth plan.
    pub fn gt_exploration(&self) -> &[Subgoal] {
        let n = self.memory.as_ref().map_or(0, |m| m.exploration_steps);
        &self.gt_plan[..n.min(self.gt_plan.len())]
    }

    /// Structural invariants that do not require execution.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.key_transitions.is_empty() {
            out.push("no key transitions".to_owned());
        }
        let n = self.gt_plan.len();
        if !(MIN_PLAN_LEN..=MAX_PLAN_LEN).contains(&n) {
            out.push(format!("plan length {n} outside [{MIN_PLAN_LEN}, {MAX_PLAN_LEN}]"));
        }
        if self.anchor_policy.max_steps < 2 * n as u64 {
            out.push("step limit below oracle plan length".to_owned());
        }
        if let Err(e) = self.perturbations.check(self.registry()) {
            out.push(e);
        }
        if self.grounding.iter().any(|&i| i >= n) {
            out.push("grounding index out of range".to_owned());
        }
        match self.category {
            Category::Ideal => {
                if !self.perturbations.is_empty() || !self.scene.stale_beliefs.is_empty() {
                    out.push("ideal task carries perturbations".to_owned());
                }
            }
            Category::RandomDisturbance => {
                if self.perturbations.is_empty() {
                    out.push("disturbance task has no perturbation".to_owned());
                }
            }
            Category::ObservationMismatching
                if self.scene.stale_beliefs.is_empty() && self.perturbations.silent_objects().is_empty() =>
            {
                out.push("mismatch task has nothing stale".to_owned());
            }
            _ => {}
        }
        if self.category.needs_memory() {
            match &self.memory {
                None => out.push("memory task without memory spec".to_owned()),
                Some(m) => {
                    if self.category.explores() && m.candidates.len() < 2 {
                        out.push("exploration needs at least two candidates".to_owned());
                    }
                    if m.exploration_steps > n {
                        out.push("exploration prefix longer than plan".to_owned());
                    }
                }
            }
        }
        out
    }
}
