#![allow(dead_code)]

use std::collections::BTreeMap;

use hsim_core::forge::{
    verify_task, Category, MemorySpec, PlacementConstraint, PrimitiveAction, SceneSpec, Subgoal, TaskSpec,
};
use hsim_core::orchestrator::AnchorPolicy;
use hsim_core::scene::{FixtureId, Location, Predicate, PredicateSet, SceneRegistry};
use hsim_core::sim::{PerturbationEvent, PerturbationKind, PerturbationSchedule, Trigger};

pub fn at(r: &str) -> Location {
    Location::AtRegion(r.into())
}

pub fn inside(f: &str) -> Location {
    Location::InsideFixture(f.into())
}

pub fn set(ps: Vec<Predicate>) -> PredicateSet {
    PredicateSet::new(ps).expect("non-empty")
}

pub fn on(o: &str, r: &str) -> Predicate {
    Predicate::AtRegion(o.into(), r.into())
}

/// A hand-built kitchen task with no placements, perturbations or questions.
pub fn task(id: &str, category: Category, plan: Vec<PrimitiveAction>, transitions: Vec<PredicateSet>) -> TaskSpec {
    TaskSpec {
        id: id.into(),
        category,
        seed: 0,
        instruction: format!("hand-built task {id}"),
        gt_plan: plan.into_iter().map(Subgoal::from).collect(),
        key_transitions: transitions,
        perturbations: PerturbationSchedule::default(),
        qa_set: Vec::new(),
        anchor_policy: AnchorPolicy::default(),
        scene: SceneSpec {
            registry: SceneRegistry::kitchen(),
            placements: Vec::new(),
            articulation: BTreeMap::new(),
            stale_beliefs: Vec::new(),
        },
        grounding: Vec::new(),
        memory: None,
    }
}

/// Moves `a` and then `b` from the counter to the dining table; after the
/// first transition `b` is relocated to `to`.
pub fn disturbed_pair(id: &str, a: (&str, &str), b: (&str, &str), to: &str) -> TaskSpec {
    let goal = "dining_table_top";
    let plan = vec![
        PrimitiveAction::pick(a.0, at(a.1)),
        PrimitiveAction::place(a.0, at(goal)),
        PrimitiveAction::pick(b.0, at(b.1)),
        PrimitiveAction::place(b.0, at(goal)),
    ];
    let mut t = task(id, Category::RandomDisturbance, plan, vec![set(vec![on(a.0, goal)]), set(vec![on(b.0, goal)])]);
    t.perturbations.events.push(PerturbationEvent {
        trigger: Trigger::AfterTransition(1),
        kind: PerturbationKind::Relocate { object: b.0.into(), to: at(to) },
        silent: false,
    });
    assert!(verify_task(&t).passed, "{id} must verify");
    t
}

/// The constructed disturbance tasks: the second goal object moves elsewhere
/// once the first has been delivered.
pub fn disturbance_corpus() -> Vec<TaskSpec> {
    vec![
        disturbed_pair("dist-0", ("plate", "counter_top"), ("bowl", "counter_top"), "shelf_top"),
        disturbed_pair("dist-1", ("bowl", "counter_top"), ("plate", "counter_top"), "coffee_table_top"),
        disturbed_pair("dist-2", ("mug", "counter_corner"), ("apple", "shelf_top"), "counter_top"),
        disturbed_pair("dist-3", ("bread", "counter_corner"), ("mug", "counter_corner"), "stove_top"),
        disturbed_pair("dist-4", ("apple", "shelf_top"), ("bread", "counter_corner"), "coffee_table_top"),
        disturbed_pair("dist-5", ("wine_bottle", "shelf_top"), ("plate", "counter_top"), "counter_corner"),
    ]
}

/// Containers available for hiding in declaration order.
pub const COMPARTMENTS: [&str; 4] =
    ["cabinet_top_compartment", "cabinet_upper_compartment", "cabinet_lower_compartment", "cabinet_bottom_compartment"];

/// Exploration task: the apple is hidden in `candidates[hidden]`, all
/// candidates start closed, and the reference plan sweeps in declaration order.
pub fn exploration_task(candidates: &[&str], hidden: usize) -> TaskSpec {
    let h = candidates[hidden];
    let goal = "dining_table_top";
    let mut plan = Vec::new();
    for c in &candidates[..hidden] {
        plan.push(PrimitiveAction::open(*c));
        plan.push(PrimitiveAction::close(*c));
    }
    plan.push(PrimitiveAction::open(h));
    let exploration_steps = plan.len();
    plan.push(PrimitiveAction::pick("apple", inside(h)));
    plan.push(PrimitiveAction::close(h));
    plan.push(PrimitiveAction::place("apple", at(goal)));
    let pick = exploration_steps;
    let mut t = task(
        &format!("explore-{}-{hidden}", candidates.len()),
        Category::MemoryExploration,
        plan,
        vec![set(vec![Predicate::Open(h.into())]), set(vec![on("apple", goal), Predicate::Closed(h.into())])],
    );
    t.scene.placements.push(PlacementConstraint { object: "apple".into(), initial: inside(h), goal: Some(at(goal)) });
    t.grounding = vec![pick, pick + 1];
    t.memory = Some(MemorySpec {
        target: "apple".into(),
        candidates: candidates.iter().map(|c| FixtureId::new(*c)).collect(),
        target_container: Some(h.into()),
        goal: at(goal),
        exploration_steps,
    });
    let report = verify_task(&t);
    assert!(report.passed, "{}: {report:?}", t.id);
    t
}

/// All orderings of `items`.
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

pub struct NegativeCase {
    pub task: TaskSpec,
    pub step: usize,
    pub violated: hsim_core::sim::Requirement,
}

fn pour(o: &str, r: &str) -> PrimitiveAction {
    PrimitiveAction::new(hsim_core::ActionType::Pour).with_object(o).with_target(at(r))
}

/// Invalid tasks, each with the step that must fail and the precondition it violates.
pub fn negative_corpus() -> Vec<NegativeCase> {
    use hsim_core::sim::Requirement::{self, Holds};
    use PrimitiveAction as A;
    let case = |id: &str, plan: Vec<PrimitiveAction>, step: usize, violated: Requirement| {
        let goal = set(vec![Predicate::GripperEmpty]);
        NegativeCase { task: task(id, Category::Ideal, plan, vec![goal]), step, violated }
    };
    vec![
        case(
            "neg-missing-open-fridge",
            vec![A::pick("milk", inside("short_fridge")), A::place("milk", at("counter_top"))],
            0,
            Holds(Predicate::Open("short_fridge".into())),
        ),
        case(
            "neg-missing-open-drawer",
            vec![A::pick("fork", inside("drawer_left")), A::place("fork", at("dining_table_top"))],
            0,
            Holds(Predicate::Open("drawer_left".into())),
        ),
        case(
            "neg-missing-open-store",
            vec![A::pick("plate", at("counter_top")), A::store("plate", "cabinet_top_compartment")],
            1,
            Holds(Predicate::Open("cabinet_top_compartment".into())),
        ),
        case(
            "neg-reclosed-before-pick",
            vec![
                A::open("drawer_right"),
                A::close("drawer_right"),
                A::pick("spoon", inside("drawer_right")),
                A::place("spoon", at("counter_top")),
            ],
            2,
            Holds(Predicate::Open("drawer_right".into())),
        ),
        case(
            "neg-pick-while-holding",
            vec![A::pick("plate", at("counter_top")), A::pick("bowl", at("counter_top"))],
            1,
            Holds(Predicate::GripperEmpty),
        ),
        case(
            "neg-pick-while-holding-mug",
            vec![A::pick("mug", at("counter_corner")), A::pick("bread", at("counter_corner"))],
            1,
            Holds(Predicate::GripperEmpty),
        ),
        case(
            "neg-pick-while-holding-open-fridge",
            vec![A::pick("apple", at("shelf_top")), A::open("short_fridge"), A::pick("milk", inside("short_fridge"))],
            2,
            Holds(Predicate::GripperEmpty),
        ),
        case(
            "neg-pour-from-empty-gripper",
            vec![pour("wine_bottle", "sink_basin"), A::new(hsim_core::ActionType::Wait)],
            0,
            Holds(Predicate::Holding("wine_bottle".into())),
        ),
        case(
            "neg-pour-after-putting-down",
            vec![
                A::pick("wine_bottle", at("shelf_top")),
                A::place("wine_bottle", at("counter_top")),
                pour("wine_bottle", "sink_basin"),
            ],
            2,
            Holds(Predicate::Holding("wine_bottle".into())),
        ),
        case(
            "neg-pour-holding-other",
            vec![A::open("short_fridge"), A::pick("butter", inside("short_fridge")), pour("milk", "sink_basin")],
            2,
            Holds(Predicate::Holding("milk".into())),
        ),
        case(
            "neg-pour-into-non-receptacle",
            vec![A::pick("wine_bottle", at("shelf_top")), pour("wine_bottle", "counter_top")],
            1,
            Requirement::Receptacle("counter_top".into()),
        ),
        case(
            "neg-open-twice",
            vec![A::open("microwave"), A::open("microwave")],
            1,
            Holds(Predicate::Closed("microwave".into())),
        ),
        case(
            "neg-open-fixed",
            vec![A::open("counter"), A::new(hsim_core::ActionType::Wait)],
            0,
            Requirement::Articulated("counter".into()),
        ),
    ]
}
