use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::forge::{advance_achieved, compile_scene, ActionType, Category, PrimitiveAction, Subgoal, TaskSpec};
use crate::planner::{AnchorContext, MemoryBank, Planner, PlannerDecision};
use crate::scene::{eval_set, Location, ObjectId, PredicateSet, SceneState};
use crate::seed::split;
use crate::sim::{expand, Env, NoiseConfig, Observation, ObservationMode, Requirement, StepOutcome, StepStatus};

use super::trace::{
    AnchorRecord, EpisodeHeader, EpisodeSummary, EpisodeTrace, ExplorationRecord, QaRecord, StepRecord, Terminal,
    TraceEvent,
};
use super::{AnchorMode, AnchorPolicy};

/// Per-episode execution settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub noise: NoiseConfig,
    pub mode: ObservationMode,
    /// When false, scheduled perturbations and stale beliefs are suppressed.
    pub perturbations: bool,
    pub anchor: AnchorPolicy,
}

impl EpisodeConfig {
    /// The task's own anchor policy and its category's default observation mode.
    pub fn for_task(task: &TaskSpec, noise: NoiseConfig) -> Self {
        Self { noise, mode: default_mode(task), perturbations: true, anchor: task.anchor_policy }
    }
}

/// Ideal tasks are fully observed; mismatch categories report stale locations
/// for the objects that can go stale; everything else hides closed contents.
pub fn default_mode(task: &TaskSpec) -> ObservationMode {
    match task.category {
        Category::Ideal => ObservationMode::Full,
        Category::ObservationMismatching | Category::Mix => {
            let mut objs: BTreeSet<ObjectId> = task.scene.stale_beliefs.iter().map(|b| b.object.clone()).collect();
            objs.extend(task.perturbations.silent_objects());
            ObservationMode::Mismatch(objs)
        }
        _ => ObservationMode::Partial,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MacroResult {
    pub used: u64,
    pub completed: bool,
    pub unexpandable: bool,
    pub dropped: Option<ObjectId>,
    pub failure: Option<Requirement>,
}

/// System 1 for one subgoal: expands against the current observation, steps
/// primitives, re-expands after stochastic failures, and stops on success, a
/// precondition failure, `limit` primitives, or the episode clock reaching
/// `max_clock`. `on_step` returns the updated transition count.
pub fn run_macro(
    env: &mut Env,
    subgoal: &Subgoal,
    hint: Option<&Location>,
    limit: u64,
    max_clock: u64,
    mut achieved: usize,
    on_step: &mut dyn FnMut(&Env, &PrimitiveAction, &StepOutcome) -> usize,
) -> Result<MacroResult, crate::sim::SimError> {
    let mut res = MacroResult { used: 0, completed: false, unexpandable: false, dropped: None, failure: None };
    'expand: loop {
        if res.used >= limit || env.clock() >= max_clock {
            return Ok(res);
        }
        let prims = match expand(subgoal, &env.observe(), hint) {
            Ok(p) => p,
            Err(_) => {
                res.unexpandable = true;
                vec![PrimitiveAction::new(ActionType::Wait)]
            }
        };
        for p in &prims {
            if res.used >= limit || env.clock() >= max_clock {
                return Ok(res);
            }
            let out = env.step(p, achieved)?;
            res.used += 1;
            achieved = on_step(env, p, &out);
            if out.dropped.is_some() {
                res.dropped = out.dropped.clone();
            }
            match out.status {
                StepStatus::Applied => {}
                StepStatus::FailedPrecondition => {
                    res.failure = out.violated.clone();
                    return Ok(res);
                }
                StepStatus::FailedStochastic => continue 'expand,
            }
        }
        res.completed = !res.unexpandable;
        return Ok(res);
    }
}

fn holds_all(state: &SceneState, transitions: &[PredicateSet]) -> Vec<bool> {
    transitions.iter().map(|ps| eval_set(state, ps).unwrap_or(false)).collect()
}

fn target_visible(obs: &Observation, target: Option<&ObjectId>) -> bool {
    target.is_some_and(|t| obs.location_of(t).is_some())
}

struct Run<'a> {
    task: &'a TaskSpec,
    events: Vec<TraceEvent>,
    achieved: usize,
    times: Vec<Option<u64>>,
    located: bool,
    fired: Vec<crate::sim::FiredEvent>,
}

impl Run<'_> {
    fn track(&mut self, env: &Env, index: usize, p: &PrimitiveAction, out: &StepOutcome) -> usize {
        let before = self.achieved;
        let _ = advance_achieved(env.state(), &self.task.key_transitions, &mut self.achieved);
        for slot in &mut self.times[before..self.achieved] {
            *slot = Some(env.clock());
        }
        let obs = env.observe();
        let target = self.task.memory.as_ref().map(|m| &m.target);
        self.located |= target_visible(&obs, target);
        self.fired.extend(out.events.iter().cloned());
        self.events.push(TraceEvent::Step(StepRecord {
            t: env.clock(),
            subgoal: index,
            primitive: p.clone(),
            status: out.status,
            violated: out.violated.clone(),
            dropped: out.dropped.clone(),
            events: out.events.clone(),
            obs: obs.digest(),
            holds: holds_all(env.state(), &self.task.key_transitions),
            achieved: self.achieved,
        }));
        self.achieved
    }
}

/// Runs one closed-loop episode. `seed` is the episode seed; the simulator
/// draws from its "sim" sub-stream.
pub fn run_episode(
    task: &TaskSpec,
    planner: &mut dyn Planner,
    cfg: &EpisodeConfig,
    trial: u32,
    seed: u64,
    planner_name: &str,
) -> EpisodeTrace {
    let k = task.key_transitions.len();
    let mut header = EpisodeHeader {
        task: task.id.clone(),
        category: task.category,
        trial,
        seed,
        planner: planner_name.to_owned(),
        initial_holds: vec![false; k],
    };
    let mut summary = EpisodeSummary {
        terminal: Terminal::Aborted,
        abort_reason: None,
        achieved: 0,
        transition_times: vec![None; k],
        plan_pred: Vec::new(),
        plan_match: false,
        plan_match_multiset: false,
        executions: Vec::new(),
        primitives: 0,
        qa: Vec::new(),
        fired: Vec::new(),
        exploration: None,
        decision_correct: None,
    };
    let initial = match compile_scene(task) {
        Ok(s) => s,
        Err(e) => {
            summary.abort_reason = Some(e.to_string());
            return EpisodeTrace { header, events: Vec::new(), summary };
        }
    };
    header.initial_holds = holds_all(&initial, &task.key_transitions);

    let (schedule, stale) = if cfg.perturbations {
        (
            task.perturbations.clone(),
            task.scene.stale_beliefs.iter().map(|b| (b.object.clone(), b.believed.clone())).collect(),
        )
    } else {
        (Default::default(), Vec::new())
    };
    let mut env = Env::new(
        Arc::new(task.registry().clone()),
        initial,
        cfg.noise,
        cfg.mode.clone(),
        schedule,
        split(seed, &["sim"]),
    )
    .with_stale_beliefs(stale);

    let target = task.memory.as_ref().map(|m| m.target.clone());
    let candidates: BTreeSet<_> = task.memory.iter().flat_map(|m| m.candidates.iter().cloned()).collect();
    let mut run =
        Run { task, events: Vec::new(), achieved: 0, times: vec![None; k], located: false, fired: Vec::new() };
    let _ = advance_achieved(env.state(), &task.key_transitions, &mut run.achieved);
    for slot in &mut run.times[..run.achieved] {
        *slot = Some(0);
    }
    run.located = target_visible(&env.observe(), target.as_ref());

    let mut memory = MemoryBank::new(planner.uses_memory());
    let view0 = planner.view(&env.observe());
    memory.observe(&view0);

    let abort = |run: Run<'_>, mut summary: EpisodeSummary, header: EpisodeHeader, reason: String| {
        summary.terminal = Terminal::Aborted;
        summary.abort_reason = Some(reason);
        summary.achieved = run.achieved;
        summary.transition_times = run.times;
        summary.fired = run.fired;
        EpisodeTrace { header, events: run.events, summary }
    };

    let plan = match planner.plan(&view0, &memory) {
        Ok(p) => p,
        Err(e) => return abort(run, summary, header, e.to_string()),
    };
    summary.plan_pred = plan.subgoals.clone();
    summary.plan_match = plan.matches(&task.gt_plan);
    summary.plan_match_multiset = multiset_equal(&plan.subgoals, &task.gt_plan);
    let mut steps = plan.subgoals;
    memory.start_plan(steps.len());

    let policy = cfg.anchor;
    let max_clock = policy.max_steps;
    let needs_memory = task.category.needs_memory();
    let mut decision_checked = false;
    if needs_memory {
        summary.decision_correct = Some(false);
    }
    let mut pi_g = Vec::new();
    let mut asked = BTreeSet::new();
    let mut active = 0usize;
    let mut attempts = 0u32;

    let terminal = 'episode: loop {
        if active >= steps.len() {
            break Terminal::PlanExhausted;
        }
        if env.clock() >= max_clock {
            break Terminal::MaxSteps;
        }
        let view = planner.view(&env.observe());
        if let Err(e) = planner.resolve(&mut steps, active, &view, &memory) {
            return abort(run, summary, header, e.to_string());
        }
        let sg = steps[active].clone();
        let canon = sg.canonical();

        if needs_memory && !decision_checked && canon.action == ActionType::Pick && canon.object == target {
            decision_checked = true;
            let truth = target.as_ref().and_then(|t| env.state().location(t));
            summary.decision_correct = Some(canon.source.is_some() && canon.source.as_ref() == truth);
        }
        if task.category.explores()
            && !run.located
            && matches!(canon.action, ActionType::Open | ActionType::Close)
            && canon.fixture.as_ref().is_some_and(|f| candidates.contains(f))
        {
            pi_g.push(canon.clone());
        }
        summary.executions.push(canon);

        let oracle_len = expand(&sg, &env.observe_with(&ObservationMode::Full), None).map_or(1, |p| p.len());
        let budget = u64::from(policy.budget_for(oracle_len));
        let start = env.clock();
        let limit = match policy.mode {
            AnchorMode::MacroBoundary => budget,
            AnchorMode::FixedEvery(n) => budget.min(u64::from(n)),
        };
        let hint = sg.object.as_ref().and_then(|o| memory.fact(o)).cloned();
        let achieved = run.achieved;
        let mut window = vec![view];
        let seer: &dyn Planner = &*planner;
        let result = run_macro(&mut env, &sg, hint.as_ref(), limit, max_clock, achieved, &mut |env, p, out| {
            window.push(seer.view(&env.observe()));
            run.track(env, active, p, out)
        });
        let result = match result {
            Ok(r) => r,
            Err(e) => return abort(run, summary, header, e.to_string()),
        };
        if let AnchorMode::FixedEvery(n) = policy.mode {
            let wait = PrimitiveAction::new(ActionType::Wait);
            while env.clock() < start + u64::from(n) && env.clock() < max_clock {
                match env.step(&wait, run.achieved) {
                    Ok(out) => {
                        window.push(planner.view(&env.observe()));
                        run.track(&env, active, &wait, &out);
                    }
                    Err(e) => return abort(run, summary, header, e.to_string()),
                }
            }
        }

        let now = planner.view(&env.observe());
        for o in &window {
            memory.observe(o);
        }
        let judgment = match planner.reflect(&window, &sg, active, &memory) {
            Ok(j) => j,
            Err(e) => return abort(run, summary, header, e.to_string()),
        };
        memory.record(&judgment, env.clock());

        let mut qa = Vec::new();
        for q in &task.qa_set {
            if asked.contains(&q.id) || run.achieved < q.after_transition {
                continue;
            }
            asked.insert(q.id.clone());
            let answer = match planner.answer(q, &now, &memory) {
                Ok(a) => a,
                Err(e) => return abort(run, summary, header, e.to_string()),
            };
            let truth = eval_set(env.state(), &q.query).unwrap_or(false);
            qa.push(QaRecord { id: q.id.clone(), t: env.clock(), answer, truth });
        }
        summary.qa.extend(qa.iter().cloned());

        let ctx = AnchorContext {
            index: active,
            plan: &steps,
            judgment: &judgment,
            attempts: attempts + 1,
            dropped: result.dropped.clone(),
            failure: result.failure.clone(),
        };
        let decision = match planner.decide(&ctx, &now, &memory) {
            Ok(d) => d,
            Err(e) => return abort(run, summary, header, e.to_string()),
        };
        run.events.push(TraceEvent::Anchor(AnchorRecord {
            t: env.clock(),
            index: active,
            subgoal: sg.text.clone(),
            judgment: judgment.clone(),
            decision: decision.clone(),
            qa,
            memory: memory.digest(),
        }));
        match &decision {
            PlannerDecision::Continue | PlannerDecision::Answer(_) => attempts += 1,
            PlannerDecision::AdvanceTo(j) => {
                if *j > steps.len() {
                    let reason = format!("advance to {j} beyond plan of {}", steps.len());
                    return abort(run, summary, header, reason);
                }
                active = *j;
                attempts = 0;
                memory.apply(&decision, active, steps.len());
            }
            PlannerDecision::Replace(p) => {
                let cut = (active + usize::from(judgment.judged_complete)).min(steps.len());
                steps.truncate(cut);
                steps.extend(p.subgoals.iter().cloned());
                memory.apply(&decision, cut, steps.len());
                active = cut;
                attempts = 0;
            }
            PlannerDecision::DeclareDone => {
                memory.apply(&decision, active, steps.len());
                break 'episode Terminal::Done;
            }
        }
    };

    summary.terminal = terminal;
    summary.achieved = run.achieved;
    summary.transition_times = run.times;
    summary.primitives = env.clock();
    summary.fired = run.fired;
    if task.category.explores() {
        summary.exploration = Some(ExplorationRecord {
            pi_g,
            pi_gt: task.gt_exploration().iter().map(Subgoal::canonical).collect(),
            located: run.located,
        });
    }
    EpisodeTrace { header, events: run.events, summary }
}

fn multiset_equal(a: &[Subgoal], b: &[Subgoal]) -> bool {
    let key = |s: &[Subgoal]| {
        let mut v: Vec<String> = s.iter().map(|x| serde_json::to_string(&x.canonical()).expect("serializes")).collect();
        v.sort();
        v
    };
    a.len() == b.len() && key(a) == key(b)
}
