use serde::{Deserialize, Serialize};

use crate::forge::{ActionType, Category, Subgoal, TaskSpec};
use crate::scene::{FixtureId, Location, ObjectId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryBrief {
    pub target: ObjectId,
    pub candidates: Vec<FixtureId>,
    pub goal: Location,
}

/// What a non-oracle planner is told about a task: the instruction, a plan
/// skeleton whose location-dependent slots are blank, and for memory tasks
/// the target and its candidate containers (but not which one holds it).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskBrief {
    pub task_id: String,
    pub instruction: String,
    pub category: Category,
    pub skeleton: Vec<Subgoal>,
    pub memory: Option<MemoryBrief>,
}

impl TaskBrief {
    pub fn from_task(task: &TaskSpec) -> Self {
        let skip = if task.category.explores() { task.memory.as_ref().map_or(0, |m| m.exploration_steps) } else { 0 };
        let skeleton = task
            .gt_plan
            .iter()
            .enumerate()
            .skip(skip)
            .map(|(i, sg)| if task.grounding.contains(&i) { redact(sg) } else { sg.clone() })
            .collect();
        Self {
            task_id: task.id.clone(),
            instruction: task.instruction.clone(),
            category: task.category,
            skeleton,
            memory: task.memory.as_ref().map(|m| MemoryBrief {
                target: m.target.clone(),
                candidates: m.candidates.clone(),
                goal: m.goal.clone(),
            }),
        }
    }
}

/// Blanks the slots that depend on where things are.
pub(crate) fn redact(sg: &Subgoal) -> Subgoal {
    let mut out = sg.clone();
    match sg.action {
        ActionType::Pick => out.source = None,
        a if a.targets_fixture() => out.fixture = None,
        _ => {}
    }
    out.rerender();
    out
}
