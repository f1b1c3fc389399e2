use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::orchestrator::AnchorPolicy;
use crate::scene::{
    eval_predicate, Articulation, FixtureId, Location, ObjectId, Power, Predicate, PredicateSet, RegionId,
    SceneRegistry, SceneState,
};
use crate::seed::split;
use crate::sim::{self, NoiseConfig, PerturbationEvent, PerturbationKind, PerturbationSchedule, Trigger};

use super::{
    compile_scene, reference_run, verify_task, ActionType, BinaryQuestion, Category, ForgeError, MemorySpec,
    PlacementConstraint, PrimitiveAction, SceneSpec, StaleBelief, Subgoal, TaskSpec,
};

/// Template instantiations tried before giving up.
pub const MAX_ATTEMPTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    SetTable,
    HeatLiquid,
    Microwave,
    StoreGroceries,
    MakeCoffee,
    RinseBottle,
    Tidy,
    /// Hidden-object retrieval used by the memory categories.
    Retrieve,
}

impl Template {
    pub const ALL: [Template; 8] = [
        Template::SetTable,
        Template::HeatLiquid,
        Template::Microwave,
        Template::StoreGroceries,
        Template::MakeCoffee,
        Template::RinseBottle,
        Template::Tidy,
        Template::Retrieve,
    ];

    fn suits(self, category: Category) -> bool {
        use Template::*;
        match category {
            Category::Ideal => self != Retrieve,
            Category::RandomDisturbance => matches!(self, SetTable | StoreGroceries | Tidy),
            Category::ObservationMismatching => {
                matches!(self, SetTable | Microwave | StoreGroceries | MakeCoffee | Tidy)
            }
            Category::MemoryExploration | Category::MemoryExecution | Category::Mix => self == Retrieve,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateLibrary {
    pub templates: Vec<Template>,
}

impl Default for TemplateLibrary {
    fn default() -> Self {
        Self { templates: Template::ALL.to_vec() }
    }
}

impl TemplateLibrary {
    pub fn suitable(&self, category: Category) -> Vec<Template> {
        self.templates.iter().copied().filter(|t| t.suits(category)).collect()
    }
}

fn id_is(reg: &SceneRegistry, id: &str) -> bool {
    reg.kind_of(id).is_some()
}

fn region(id: &str) -> Location {
    Location::AtRegion(id.into())
}

fn words(id: &str) -> String {
    id.replace('_', " ")
}

fn list(items: &[ObjectId]) -> String {
    let names: Vec<String> = items.iter().map(|o| format!("the {}", words(o.as_str()))).collect();
    match names.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Plain surfaces: regions without capacity limits that are neither the floor,
/// a receptacle, nor on top of a container.
fn surfaces(reg: &SceneRegistry) -> Vec<RegionId> {
    reg.fixtures
        .iter()
        .filter(|f| !f.container)
        .flat_map(|f| f.regions.iter())
        .filter(|r| r.id != reg.floor_region && r.capacity.is_none() && !r.receptacle)
        .map(|r| r.id.clone())
        .collect()
}

/// Containers that can hide an object: unbounded and empty in `state`.
fn hiding_places(reg: &SceneRegistry, state: &SceneState) -> Vec<FixtureId> {
    reg.containers()
        .filter(|f| f.capacity.is_none() && f.articulation != Articulation::Fixed)
        .filter(|f| state.occupants(&Location::InsideFixture(f.id.clone())) == 0)
        .map(|f| f.id.clone())
        .collect()
}

/// Accumulates a plan while tracking the state it produces.
struct Builder<'a> {
    reg: &'a SceneRegistry,
    state: SceneState,
    steps: Vec<Subgoal>,
    rng: ChaCha8Rng,
}

impl<'a> Builder<'a> {
    fn new(reg: &'a SceneRegistry, state: SceneState) -> Self {
        Self { reg, state, steps: Vec::new(), rng: ChaCha8Rng::seed_from_u64(0) }
    }

    fn act(&mut self, a: PrimitiveAction) -> Option<usize> {
        let (next, out) = sim::step(self.reg, &self.state, &a, &NoiseConfig::perfect(), &mut self.rng).ok()?;
        if !out.applied() {
            return None;
        }
        self.state = next;
        self.steps.push(a.into());
        Some(self.steps.len() - 1)
    }

    fn loc(&self, o: &ObjectId) -> Option<Location> {
        self.state.location(o).cloned()
    }

    /// Picks `o` wherever it is, opening and re-closing its container.
    /// Returns the index of the pick step.
    fn fetch(&mut self, o: &ObjectId) -> Option<usize> {
        let src = self.loc(o)?;
        match &src {
            Location::InsideFixture(f) => {
                let opened = !self.state.fixtures[f].is_open();
                if opened {
                    self.act(PrimitiveAction::open(f.clone()))?;
                }
                let i = self.act(PrimitiveAction::pick(o.clone(), src.clone()))?;
                if opened {
                    self.act(PrimitiveAction::close(f.clone()))?;
                }
                Some(i)
            }
            Location::AtRegion(_) => self.act(PrimitiveAction::pick(o.clone(), src)),
            Location::InGripper => None,
        }
    }

    fn put(&mut self, o: &ObjectId, target: Location) -> Option<usize> {
        match &target {
            Location::InsideFixture(f) => {
                let opened = !self.state.fixtures[f].is_open();
                if opened {
                    self.act(PrimitiveAction::open(f.clone()))?;
                }
                let i = self.act(PrimitiveAction::store(o.clone(), f.clone()))?;
                if opened {
                    self.act(PrimitiveAction::close(f.clone()))?;
                }
                Some(i)
            }
            _ => self.act(PrimitiveAction::place(o.clone(), target)),
        }
    }
}

/// A template instantiation before category decoration.
struct Draft {
    instruction: String,
    steps: Vec<Subgoal>,
    transitions: Vec<PredicateSet>,
    /// Objects the plan moves, with the index of their first pick.
    moved: Vec<(ObjectId, Location, Location, usize)>,
    articulation: BTreeMap<FixtureId, Articulation>,
    placements: Vec<PlacementConstraint>,
    grounding: Vec<usize>,
    memory: Option<MemorySpec>,
    perturbations: PerturbationSchedule,
    stale: Vec<StaleBelief>,
}

impl Draft {
    fn new(instruction: String, b: Builder<'_>, transitions: Vec<PredicateSet>) -> Self {
        Self {
            instruction,
            steps: b.steps,
            transitions,
            moved: Vec::new(),
            articulation: BTreeMap::new(),
            placements: Vec::new(),
            grounding: Vec::new(),
            memory: None,
            perturbations: PerturbationSchedule::default(),
            stale: Vec::new(),
        }
    }
}

fn objects_where(
    reg: &SceneRegistry,
    state: &SceneState,
    keep: impl Fn(&ObjectId, &Location) -> bool,
) -> Vec<ObjectId> {
    reg.objects.iter().filter(|o| state.location(&o.id).is_some_and(|l| keep(&o.id, l))).map(|o| o.id.clone()).collect()
}

fn tagged(reg: &SceneRegistry, o: &ObjectId, tags: &[&str]) -> bool {
    reg.object(o).is_some_and(|s| tags.iter().any(|t| s.has_tag(t)))
}

fn set_table(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let tables: Vec<&str> = ["dining_table_top", "coffee_table_top"].into_iter().filter(|t| id_is(reg, t)).collect();
    let goal = region(tables.choose(rng)?);
    let mut pool = objects_where(reg, s0, |o, l| {
        *l != goal && *l != Location::InGripper && tagged(reg, o, &["dish", "utensil", "food"])
    });
    pool.shuffle(rng);
    let n = rng.random_range(2..=3).min(pool.len());
    if n < 2 {
        return None;
    }
    let chosen = &pool[..n];
    let mut b = Builder::new(reg, s0.clone());
    let mut moved = Vec::new();
    let mut transitions = Vec::new();
    for o in chosen {
        let from = b.loc(o)?;
        let i = b.fetch(o)?;
        b.put(o, goal.clone())?;
        moved.push((o.clone(), from, goal.clone(), i));
        transitions.push(PredicateSet::single(Predicate::AtRegion(o.clone(), goal.region()?.clone())));
    }
    let instruction =
        format!("Set the {} with {}.", words(goal.region()?.as_str()).trim_end_matches(" top"), list(chosen));
    let mut d = Draft::new(instruction, b, transitions);
    d.moved = moved;
    Some(d)
}

fn heat_liquid(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    if !["stove", "stove_pot", "counter_top"].iter().all(|i| id_is(reg, i)) {
        return None;
    }
    let pool = objects_where(reg, s0, |o, l| *l != Location::InGripper && tagged(reg, o, &["liquid"]));
    let l = pool.choose(rng)?.clone();
    let mut b = Builder::new(reg, s0.clone());
    let from = b.loc(&l)?;
    let i = b.fetch(&l)?;
    b.act(PrimitiveAction::new(ActionType::Pour).with_object(l.clone()).with_target(region("stove_pot")))?;
    b.act(PrimitiveAction::new(ActionType::Return).with_object(l.clone()).with_target(region("counter_top")))?;
    b.act(PrimitiveAction::new(ActionType::Turn).with_fixture("stove"))?;
    let transitions = vec![
        PredicateSet::single(Predicate::AtRegion(l.clone(), "counter_top".into())),
        PredicateSet::single(Predicate::PoweredOn("stove".into())),
    ];
    let mut d = Draft::new(
        format!("Heat some {} on the stove and leave the carton on the counter.", words(l.as_str())),
        b,
        transitions,
    );
    d.moved = vec![(l, from, region("counter_top"), i)];
    Some(d)
}

fn microwave(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let mw = FixtureId::from("microwave");
    reg.fixture(&mw)?;
    let pool = objects_where(reg, s0, |o, l| matches!(l, Location::AtRegion(_)) && tagged(reg, o, &["heatable"]));
    let h = pool.choose(rng)?.clone();
    let mut b = Builder::new(reg, s0.clone());
    let from = b.loc(&h)?;
    let i = b.fetch(&h)?;
    b.put(&h, Location::InsideFixture(mw.clone()))?;
    b.act(PrimitiveAction::new(ActionType::Press).with_fixture(mw.clone()))?;
    let transitions = vec![
        PredicateSet::new(vec![Predicate::Inside(h.clone(), mw.clone()), Predicate::Closed(mw.clone())]).ok()?,
        PredicateSet::single(Predicate::PoweredOn(mw.clone())),
    ];
    let mut d = Draft::new(format!("Warm up the {} in the microwave.", words(h.as_str())), b, transitions);
    d.moved = vec![(h, from, Location::InsideFixture(mw), i)];
    Some(d)
}

fn store_groceries(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let fridge = FixtureId::from("short_fridge");
    reg.fixture(&fridge)?;
    let mut pool =
        objects_where(reg, s0, |o, l| matches!(l, Location::AtRegion(_)) && tagged(reg, o, &["food", "liquid"]));
    pool.shuffle(rng);
    if pool.len() < 2 {
        return None;
    }
    let chosen = pool[..2].to_vec();
    let mut b = Builder::new(reg, s0.clone());
    b.act(PrimitiveAction::open(fridge.clone()))?;
    let mut moved = Vec::new();
    let mut transitions = Vec::new();
    for o in &chosen {
        let from = b.loc(o)?;
        let i = b.fetch(o)?;
        b.put(o, Location::InsideFixture(fridge.clone()))?;
        moved.push((o.clone(), from, Location::InsideFixture(fridge.clone()), i));
        transitions.push(PredicateSet::single(Predicate::Inside(o.clone(), fridge.clone())));
    }
    b.act(PrimitiveAction::close(fridge.clone()))?;
    transitions.push(PredicateSet::single(Predicate::Closed(fridge)));
    let mut d = Draft::new(format!("Put {} away in the fridge and close it.", list(&chosen)), b, transitions);
    d.moved = moved;
    Some(d)
}

fn make_coffee(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let tray = RegionId::from("coffee_machine_tray");
    if !id_is(reg, tray.as_str()) || !id_is(reg, "coffee_machine") {
        return None;
    }
    let pool = objects_where(reg, s0, |o, l| matches!(l, Location::AtRegion(_)) && tagged(reg, o, &["cup"]));
    let cup = pool.choose(rng)?.clone();
    let tables: Vec<&str> = ["dining_table_top", "coffee_table_top"].into_iter().filter(|t| id_is(reg, t)).collect();
    let goal = RegionId::from(*tables.choose(rng)?);
    let mut b = Builder::new(reg, s0.clone());
    let from = b.loc(&cup)?;
    let i = b.fetch(&cup)?;
    b.put(&cup, Location::AtRegion(tray.clone()))?;
    b.act(PrimitiveAction::new(ActionType::Press).with_fixture("coffee_machine"))?;
    b.fetch(&cup)?;
    b.put(&cup, Location::AtRegion(goal.clone()))?;
    let transitions = vec![
        PredicateSet::single(Predicate::AtRegion(cup.clone(), tray)),
        PredicateSet::single(Predicate::PoweredOn("coffee_machine".into())),
        PredicateSet::single(Predicate::AtRegion(cup.clone(), goal.clone())),
    ];
    let mut d = Draft::new(
        format!("Make a coffee in the {} and bring it to the {}.", words(cup.as_str()), words(goal.as_str())),
        b,
        transitions,
    );
    d.moved = vec![(cup, from, Location::AtRegion(goal), i)];
    Some(d)
}

fn rinse_bottle(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let basin = reg.regions().find(|r| r.receptacle && r.capacity.is_none())?.id.clone();
    let pool = objects_where(reg, s0, |o, l| *l != Location::InGripper && tagged(reg, o, &["liquid"]));
    let l = pool.choose(rng)?.clone();
    let from = s0.location(&l)?.clone();
    let dests: Vec<RegionId> = surfaces(reg).into_iter().filter(|r| from.region() != Some(r)).collect();
    let dest = dests.choose(rng)?.clone();
    let mut b = Builder::new(reg, s0.clone());
    let i = b.fetch(&l)?;
    b.act(
        PrimitiveAction::new(ActionType::Pour).with_object(l.clone()).with_target(Location::AtRegion(basin.clone())),
    )?;
    b.act(
        PrimitiveAction::new(ActionType::Return).with_object(l.clone()).with_target(Location::AtRegion(dest.clone())),
    )?;
    let transitions = vec![PredicateSet::single(Predicate::AtRegion(l.clone(), dest.clone()))];
    let mut d = Draft::new(
        format!(
            "Empty the {} into the {} and leave it on the {}.",
            words(l.as_str()),
            words(basin.as_str()),
            words(dest.as_str())
        ),
        b,
        transitions,
    );
    d.moved = vec![(l, from, Location::AtRegion(dest), i)];
    Some(d)
}

/// Slides one object aside within its fixture and puts another in the freed spot.
fn tidy(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let surf = surfaces(reg);
    let mut pairs = Vec::new();
    for f in reg.fixtures.iter().filter(|f| !f.container) {
        for a in f.regions.iter().filter(|r| surf.contains(&r.id)) {
            for z in f.regions.iter().filter(|r| r.id != a.id && surf.contains(&r.id)) {
                pairs.push((a.id.clone(), z.id.clone()));
            }
        }
    }
    pairs.retain(|(a, _)| s0.occupants(&Location::AtRegion(a.clone())) > 0);
    let (from, aside) = pairs.choose(rng)?.clone();
    let here = objects_where(reg, s0, |_, l| *l == Location::AtRegion(from.clone()));
    let o1 = here.choose(rng)?.clone();
    let others = objects_where(reg, s0, |o, l| {
        *l != Location::AtRegion(from.clone())
            && *l != Location::InGripper
            && o != &o1
            && tagged(reg, o, &["dish", "food", "utensil"])
    });
    let o2 = others.choose(rng)?.clone();
    let mut b = Builder::new(reg, s0.clone());
    b.act(
        PrimitiveAction::new(ActionType::Push)
            .with_object(o1.clone())
            .with_source(Location::AtRegion(from.clone()))
            .with_target(Location::AtRegion(aside.clone())),
    )?;
    let o2_from = b.loc(&o2)?;
    let i = b.fetch(&o2)?;
    b.put(&o2, Location::AtRegion(from.clone()))?;
    let transitions = vec![
        PredicateSet::single(Predicate::AtRegion(o1.clone(), aside.clone())),
        PredicateSet::single(Predicate::AtRegion(o2.clone(), from.clone())),
    ];
    let mut d = Draft::new(
        format!(
            "Push the {} over to the {}, then put the {} on the {}.",
            words(o1.as_str()),
            words(aside.as_str()),
            words(o2.as_str()),
            words(from.as_str())
        ),
        b,
        transitions,
    );
    d.moved = vec![(o2, o2_from, Location::AtRegion(from), i)];
    Some(d)
}

/// Exploration: sweep closed candidates in declaration order until the target
/// shows up, then bring it to the goal.
fn retrieve_exploration(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng, mix: bool) -> Option<Draft> {
    let pool = hiding_places(reg, s0);
    if pool.len() < 2 {
        return None;
    }
    let c = rng.random_range(2..=pool.len().min(4));
    let mut candidates: Vec<FixtureId> = pool.choose_multiple(rng, c).cloned().collect();
    candidates.sort_by_key(|f| pool.iter().position(|p| p == f));
    let j = rng.random_range(0..c);
    let hidden = candidates[j].clone();
    let targets = objects_where(reg, s0, |o, l| *l != Location::InGripper && tagged(reg, o, &["hideable"]));
    let target = targets.choose(rng)?.clone();
    let original = s0.location(&target)?.clone();
    let goals: Vec<RegionId> = surfaces(reg).into_iter().filter(|r| original.region() != Some(r)).collect();
    let goal = goals.choose(rng)?.clone();

    let mut s = s0.clone();
    s.placements.insert(target.clone(), Location::InsideFixture(hidden.clone()));
    let mut articulation = BTreeMap::new();
    for f in &candidates {
        s.fixtures.get_mut(f)?.articulation = Articulation::Closed;
        articulation.insert(f.clone(), Articulation::Closed);
    }

    let mut b = Builder::new(reg, s.clone());
    for f in &candidates[..j] {
        b.act(PrimitiveAction::open(f.clone()))?;
        b.act(PrimitiveAction::close(f.clone()))?;
    }
    b.act(PrimitiveAction::open(hidden.clone()))?;
    let exploration_steps = b.steps.len();
    let pick = b.act(PrimitiveAction::pick(target.clone(), Location::InsideFixture(hidden.clone())))?;
    let close = b.act(PrimitiveAction::close(hidden.clone()))?;
    b.put(&target, Location::AtRegion(goal.clone()))?;
    let mut transitions = vec![
        PredicateSet::single(Predicate::Open(hidden.clone())),
        PredicateSet::new(vec![Predicate::AtRegion(target.clone(), goal.clone()), Predicate::Closed(hidden.clone())])
            .ok()?,
    ];
    let mut instruction = format!(
        "Find the {}, which is in one of the {} closed compartments, and put it on the {}.",
        words(target.as_str()),
        c,
        words(goal.as_str())
    );

    let mut perturbations = PerturbationSchedule::default();
    let mut moved =
        vec![(target.clone(), Location::InsideFixture(hidden.clone()), Location::AtRegion(goal.clone()), pick)];
    if mix {
        let extra = objects_where(reg, &b.state, |o, l| {
            o != &target && matches!(l, Location::AtRegion(r) if *r != goal) && tagged(reg, o, &["dish", "food"])
        });
        let o2 = extra.choose(rng)?.clone();
        let from2 = b.loc(&o2)?;
        let dests: Vec<RegionId> = surfaces(reg).into_iter().filter(|r| from2.region() != Some(r)).collect();
        let goal2 = dests.choose(rng)?.clone();
        let i2 = b.fetch(&o2)?;
        b.put(&o2, Location::AtRegion(goal2.clone()))?;
        transitions.push(PredicateSet::single(Predicate::AtRegion(o2.clone(), goal2.clone())));
        let aside: Vec<RegionId> =
            surfaces(reg).into_iter().filter(|r| from2.region() != Some(r) && *r != goal2 && *r != goal).collect();
        let to = aside.choose(rng)?.clone();
        perturbations.events.push(PerturbationEvent {
            trigger: Trigger::AfterTransition(2),
            kind: PerturbationKind::Relocate { object: o2.clone(), to: Location::AtRegion(to) },
            silent: true,
        });
        instruction.push_str(&format!(" Then move the {} to the {}.", words(o2.as_str()), words(goal2.as_str())));
        moved.push((o2, from2, Location::AtRegion(goal2), i2));
    }

    let mut d = Draft::new(instruction, b, transitions);
    d.moved = moved;
    d.articulation = articulation;
    d.placements.push(PlacementConstraint {
        object: target.clone(),
        initial: Location::InsideFixture(hidden.clone()),
        goal: Some(Location::AtRegion(goal.clone())),
    });
    d.grounding = vec![pick, close];
    d.perturbations = perturbations;
    d.memory = Some(MemorySpec {
        target,
        candidates,
        target_container: Some(hidden),
        goal: Location::AtRegion(goal),
        exploration_steps,
    });
    Some(d)
}

/// Execution: the target is seen in an open candidate, everything is closed,
/// and after a distractor step the target must be retrieved from memory.
fn retrieve_execution(reg: &SceneRegistry, s0: &SceneState, rng: &mut ChaCha8Rng) -> Option<Draft> {
    let pool = hiding_places(reg, s0);
    if pool.len() < 2 {
        return None;
    }
    let c = rng.random_range(2..=pool.len().min(4));
    let mut candidates: Vec<FixtureId> = pool.choose_multiple(rng, c).cloned().collect();
    candidates.sort_by_key(|f| pool.iter().position(|p| p == f));
    let hidden = candidates[rng.random_range(0..c)].clone();
    let targets = objects_where(reg, s0, |o, l| *l != Location::InGripper && tagged(reg, o, &["hideable"]));
    let target = targets.choose(rng)?.clone();
    let original = s0.location(&target)?.clone();

    let mut s = s0.clone();
    s.placements.insert(target.clone(), Location::InsideFixture(hidden.clone()));
    let mut articulation = BTreeMap::new();
    for f in &candidates {
        s.fixtures.get_mut(f)?.articulation = Articulation::Open;
        articulation.insert(f.clone(), Articulation::Open);
    }

    let mut b = Builder::new(reg, s.clone());
    for f in &candidates {
        b.act(PrimitiveAction::close(f.clone()))?;
    }
    let others = objects_where(reg, &b.state, |o, l| {
        o != &target && matches!(l, Location::AtRegion(_)) && tagged(reg, o, &["dish", "food"])
    });
    let o2 = others.choose(rng)?.clone();
    let from2 = b.loc(&o2)?;
    let spots: Vec<RegionId> = surfaces(reg).into_iter().filter(|r| from2.region() != Some(r)).collect();
    let spot = spots.choose(rng)?.clone();
    b.fetch(&o2)?;
    b.put(&o2, Location::AtRegion(spot.clone()))?;
    let goals: Vec<RegionId> =
        surfaces(reg).into_iter().filter(|r| original.region() != Some(r) && *r != spot).collect();
    let goal = goals.choose(rng)?.clone();

    let open = b.act(PrimitiveAction::open(hidden.clone()))?;
    let pick = b.act(PrimitiveAction::pick(target.clone(), Location::InsideFixture(hidden.clone())))?;
    let close = b.act(PrimitiveAction::close(hidden.clone()))?;
    b.put(&target, Location::AtRegion(goal.clone()))?;
    let transitions = vec![
        PredicateSet::single(Predicate::Holding(target.clone())),
        PredicateSet::single(Predicate::AtRegion(target.clone(), goal.clone())),
    ];
    let instruction = format!(
        "Close the open compartments, put the {} on the {}, then take the {} back out and place it on the {}.",
        words(o2.as_str()),
        words(spot.as_str()),
        words(target.as_str()),
        words(goal.as_str())
    );
    let mut d = Draft::new(instruction, b, transitions);
    d.moved = vec![(target.clone(), Location::InsideFixture(hidden.clone()), Location::AtRegion(goal.clone()), pick)];
    d.articulation = articulation;
    d.placements.push(PlacementConstraint {
        object: target.clone(),
        initial: Location::InsideFixture(hidden.clone()),
        goal: Some(Location::AtRegion(goal.clone())),
    });
    d.grounding = vec![open, pick, close];
    d.memory = Some(MemorySpec {
        target,
        candidates,
        target_container: Some(hidden),
        goal: Location::AtRegion(goal),
        exploration_steps: 0,
    });
    Some(d)
}

fn instantiate(
    template: Template,
    category: Category,
    reg: &SceneRegistry,
    s0: &SceneState,
    rng: &mut ChaCha8Rng,
) -> Option<Draft> {
    match template {
        Template::SetTable => set_table(reg, s0, rng),
        Template::HeatLiquid => heat_liquid(reg, s0, rng),
        Template::Microwave => microwave(reg, s0, rng),
        Template::StoreGroceries => store_groceries(reg, s0, rng),
        Template::MakeCoffee => make_coffee(reg, s0, rng),
        Template::RinseBottle => rinse_bottle(reg, s0, rng),
        Template::Tidy => tidy(reg, s0, rng),
        Template::Retrieve => match category {
            Category::MemoryExecution => retrieve_execution(reg, s0, rng),
            Category::Mix => retrieve_exploration(reg, s0, rng, true),
            _ => retrieve_exploration(reg, s0, rng, false),
        },
    }
}

/// Relocates the last object the plan moves, after the first transition and
/// before its pick.
fn add_disturbance(reg: &SceneRegistry, d: &mut Draft, rng: &mut ChaCha8Rng) -> Option<()> {
    let (o, from, goal, _) = d.moved.last()?.clone();
    if d.moved.len() < 2 && d.transitions.len() < 2 {
        return None;
    }
    let used: Vec<RegionId> = d
        .steps
        .iter()
        .flat_map(|s| [s.source.as_ref(), s.target.as_ref()])
        .flatten()
        .filter_map(|l| l.region().cloned())
        .collect();
    let spots: Vec<RegionId> = surfaces(reg)
        .into_iter()
        .filter(|r| from.region() != Some(r) && goal.region() != Some(r) && !used.contains(r))
        .collect();
    let to = spots.choose(rng)?.clone();
    d.perturbations.events.push(PerturbationEvent {
        trigger: Trigger::AfterTransition(1),
        kind: PerturbationKind::Relocate { object: o, to: Location::AtRegion(to) },
        silent: false,
    });
    Some(())
}

/// Seeds a stale initial belief for one object picked from a surface; the
/// pick's source is withheld from planners.
fn add_mismatch(reg: &SceneRegistry, d: &mut Draft, rng: &mut ChaCha8Rng) -> Option<()> {
    let eligible: Vec<_> =
        d.moved.iter().filter(|(_, from, _, _)| matches!(from, Location::AtRegion(_))).cloned().collect();
    let (o, from, goal, pick) = eligible.choose(rng)?.clone();
    let used: Vec<RegionId> = d
        .steps
        .iter()
        .flat_map(|s| [s.source.as_ref(), s.target.as_ref()])
        .flatten()
        .filter_map(|l| l.region().cloned())
        .collect();
    let spots: Vec<RegionId> = surfaces(reg)
        .into_iter()
        .filter(|r| from.region() != Some(r) && goal.region() != Some(r) && !used.contains(r))
        .collect();
    let believed = spots.choose(rng)?.clone();
    d.stale.push(StaleBelief { object: o, believed: Location::AtRegion(believed) });
    d.grounding.push(pick);
    Some(())
}

fn question_text(p: &Predicate) -> String {
    match p {
        Predicate::AtRegion(o, r) => format!("Is the {} on the {}?", words(o.as_str()), words(r.as_str())),
        Predicate::Inside(o, f) => format!("Is the {} inside the {}?", words(o.as_str()), words(f.as_str())),
        Predicate::Open(f) => format!("Is the {} open?", words(f.as_str())),
        Predicate::Closed(f) => format!("Is the {} closed?", words(f.as_str())),
        Predicate::Holding(o) => format!("Is the robot holding the {}?", words(o.as_str())),
        Predicate::GripperEmpty => "Is the gripper empty?".to_owned(),
        Predicate::PoweredOn(f) => format!("Is the {} switched on?", words(f.as_str())),
        Predicate::EmptyContainer(f) => format!("Is the {} empty?", words(f.as_str())),
    }
}

/// One question that holds and one that does not, both posed at the anchor
/// where their transition first fires in the reference execution.
fn balanced_questions(task: &TaskSpec, initial: SceneState, rng: &mut ChaCha8Rng) -> Option<Vec<BinaryQuestion>> {
    let run = reference_run(task, initial.clone());
    let k = task.key_transitions.len();
    let first = task.key_transitions[0].members()[0].clone();
    let last_at = run.transition_steps[k - 1]?;
    let last_state = &run.states[last_at];

    let mut candidates: Vec<Predicate> = Vec::new();
    for sg in &task.gt_plan {
        if let Some(o) = &sg.object {
            if let Some(l) = initial.location(o) {
                candidates.push(match l {
                    Location::AtRegion(r) => Predicate::AtRegion(o.clone(), r.clone()),
                    Location::InsideFixture(f) => Predicate::Inside(o.clone(), f.clone()),
                    Location::InGripper => Predicate::Holding(o.clone()),
                });
            }
            candidates.push(Predicate::Holding(o.clone()));
        }
        if let Some(f) = &sg.fixture {
            candidates.push(Predicate::Open(f.clone()));
            if initial.fixtures[f].power != Power::None {
                candidates.push(Predicate::PoweredOn(f.clone()));
            }
        }
    }
    candidates.sort();
    candidates.dedup();
    candidates.retain(|p| eval_predicate(last_state, p) == Ok(false));
    let negative = candidates.choose(rng)?.clone();
    Some(vec![
        BinaryQuestion {
            id: format!("{}-q1", task.id),
            text: question_text(&first),
            query: PredicateSet::single(first),
            after_transition: 1,
            reference_answer: true,
        },
        BinaryQuestion {
            id: format!("{}-q2", task.id),
            text: question_text(&negative),
            query: PredicateSet::single(negative),
            after_transition: k,
            reference_answer: false,
        },
    ])
}

fn assemble(id: &str, category: Category, seed: u64, reg: &SceneRegistry, mut d: Draft) -> TaskSpec {
    let base = reg.initial_state();
    for (o, from, goal, _) in &d.moved {
        if d.placements.iter().all(|p| &p.object != o) {
            d.placements.push(PlacementConstraint {
                object: o.clone(),
                initial: from.clone(),
                goal: Some(goal.clone()),
            });
        }
    }
    d.placements.retain(|p| p.goal.is_some() || base.location(&p.object) != Some(&p.initial));
    d.placements.sort_by(|a, b| a.object.cmp(&b.object));
    d.grounding.sort_unstable();
    d.grounding.dedup();
    let mut steps = d.steps;
    for s in &mut steps {
        s.rerender();
    }
    TaskSpec {
        id: id.to_owned(),
        category,
        seed,
        instruction: d.instruction,
        gt_plan: steps,
        key_transitions: d.transitions,
        perturbations: d.perturbations,
        qa_set: Vec::new(),
        anchor_policy: AnchorPolicy::default(),
        scene: SceneSpec {
            registry: reg.clone(),
            placements: d.placements,
            articulation: d.articulation,
            stale_beliefs: d.stale,
        },
        grounding: d.grounding,
        memory: d.memory,
    }
}

/// Rejection-samples a verified task from the category's templates.
pub fn generate_task(
    registry: &SceneRegistry,
    category: Category,
    library: &TemplateLibrary,
    seed: u64,
) -> Result<TaskSpec, ForgeError> {
    generate_with_id(registry, category, library, seed, &format!("{}-{seed:016x}", category.slug()))
}

pub(crate) fn generate_with_id(
    registry: &SceneRegistry,
    category: Category,
    library: &TemplateLibrary,
    seed: u64,
    id: &str,
) -> Result<TaskSpec, ForgeError> {
    let templates = library.suitable(category);
    let exhausted = ForgeError::GenerationExhausted { category, attempts: MAX_ATTEMPTS };
    if templates.is_empty() {
        return Err(exhausted);
    }
    let s0 = registry.initial_state();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(split(seed, &["attempt", &attempt.to_string()]));
        let template = *templates.choose(&mut rng).expect("non-empty");
        let Some(mut draft) = instantiate(template, category, registry, &s0, &mut rng) else {
            continue;
        };
        let decorated = match category {
            Category::RandomDisturbance => add_disturbance(registry, &mut draft, &mut rng),
            Category::ObservationMismatching => add_mismatch(registry, &mut draft, &mut rng),
            _ => Some(()),
        };
        if decorated.is_none() {
            continue;
        }
        let mut task = assemble(id, category, seed, registry, draft);
        if !verify_task(&task).passed {
            continue;
        }
        let Ok(initial) = compile_scene(&task) else { continue };
        let Some(qa) = balanced_questions(&task, initial, &mut rng) else { continue };
        task.qa_set = qa;
        return Ok(task);
    }
    Err(exhausted)
}
