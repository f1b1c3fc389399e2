//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero on any failure.

mod common;

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hsim_core::forge::{
    compile_scene, default_counts, emit_suite, verify_task, BinaryQuestion, Category, PrimitiveAction, Subgoal,
    TaskSpec,
};
use hsim_core::metrics::{exploration_term, plan_efficiency, round2, MetricsReport, ETA_AUDIT};
use hsim_core::orchestrator::{
    replay_archive, run_benchmark, run_episode, run_macro, write_archive, EpisodeConfig, PlannerSpec, RunConfig,
    Terminal,
};
use hsim_core::planner::{
    run_memory_mechanism, AnchorContext, CompletionJudgment, MemoryBank, Plan, Planner, PlannerDecision, PlannerError,
    Provenance, ScriptedConfig, ScriptedPlanner, TaskBrief,
};
use hsim_core::scene::{Articulation, FixtureId, Location, Power, SceneRegistry};
use hsim_core::seed::episode_seed;
use hsim_core::sim::{Env, FixtureView, NoiseConfig, Observation, ObservationMode};

use common::{disturbance_corpus, exploration_task, negative_corpus, permutations, COMPARTMENTS};

const SUITE_SEED: u64 = 1;
const CEILING_SECONDS: f64 = 10.0;
const ETA_TOLERANCE: f64 = 0.01;
const ETA_TOLERANCE_LAST_ROW: f64 = 0.03;
const SEPARATION_TRIALS: u32 = 20;
const EXACT: f64 = 1e-12;
const CONTRAST_TRIALS: u32 = 100;
const CONTRAST_ALPHA: f64 = 0.01;
const CALIBRATION_TRIALS: u32 = 10_000;
const CALIBRATION_P: f64 = 0.9;
const CALIBRATION_BUDGET: u64 = 3;
const CALIBRATION_TOLERANCE: f64 = 0.005;
const NEGATIVE_MIN: usize = 10;
const SUBSTITUTIONS: u64 = 50;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn default_suite() -> Vec<TaskSpec> {
    emit_suite(&SceneRegistry::kitchen(), &default_counts(), SUITE_SEED).expect("default suite")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_ceiling() -> Outcome {
    let tasks = default_suite();
    let mut cfg = RunConfig::new(PlannerSpec::Gt, 7);
    cfg.noise = NoiseConfig::perfect();
    cfg.perturbations = false;
    cfg.trials = 1;
    let start = Instant::now();
    let run = run_benchmark(&tasks, &cfg, None);
    let secs = start.elapsed().as_secs_f64();
    let all = run.report.overall.as_ref().ok_or("empty report")?;
    ensure(run.traces.len() == 60, || format!("{} episodes", run.traces.len()))?;
    ensure(round2(all.sr) == 100.0, || format!("SR {:.2}", all.sr))?;
    ensure(round2(all.acc_p) == 100.0, || format!("Acc_P {:.2}", all.acc_p))?;
    let not_done: Vec<String> =
        run.traces.iter().filter(|t| t.summary.terminal != Terminal::Done).map(|t| t.file_name()).collect();
    ensure(not_done.is_empty(), || format!("not declared done: {not_done:?}"))?;
    ensure(secs < CEILING_SECONDS, || format!("took {secs:.2}s"))?;
    Ok(format!("60 episodes, SR 100.00, Acc_P 100.00, all done, {secs:.2}s"))
}

/// (SR, Len, printed efficiency) as published.
const REFERENCE_ETA: [(f64, f64, f64); 5] =
    [(16.04, 10.67, 1.50), (15.10, 10.73, 1.41), (11.37, 8.33, 1.36), (11.19, 8.30, 1.34), (9.33, 6.95, 1.32)];

fn metric_reproduction() -> Outcome {
    ensure(ETA_AUDIT == REFERENCE_ETA, || "footer audit table differs from the reference pairs".into())?;
    let mut shown = Vec::new();
    for (i, &(sr, len, printed)) in REFERENCE_ETA.iter().enumerate() {
        let eta = plan_efficiency(sr, len).map_err(|e| e.to_string())?;
        let tol = if i == REFERENCE_ETA.len() - 1 { ETA_TOLERANCE_LAST_ROW } else { ETA_TOLERANCE };
        let diff = (round2(eta) - printed).abs();
        ensure(diff <= tol + 1e-9, || format!("{sr}/{len} = {eta:.4}, printed {printed}"))?;
        shown.push(format!("{:.2}", round2(eta)));
    }
    let report = MetricsReport::from_traces("none", &[], false);
    ensure(report.footer().iter().any(|l| l.contains("9.33/6.95 = 1.34 (reference value 1.32")), || {
        "footer does not record the last-row discrepancy".into()
    })?;
    Ok(format!("η = [{}]; last row 1.34 vs 1.32 noted in footer", shown.join(", ")))
}

fn category_separation() -> Outcome {
    let corpus = disturbance_corpus();
    let perfect = |t: &TaskSpec| EpisodeConfig::for_task(t, NoiseConfig::perfect());
    let mut blocked = 0;
    let mut restored = 0;
    let mut total = 0;
    for t in &corpus {
        for trial in 0..SEPARATION_TRIALS {
            let seed = episode_seed(99, &t.id, trial);
            total += 1;
            let mut open_loop = PlannerSpec::Gt.build(t, seed, trial);
            let mut noreplan = PlannerSpec::ScriptedNoReplan.build(t, seed, trial);
            let a = run_episode(t, open_loop.as_mut(), &perfect(t), trial, seed, "gt");
            let b = run_episode(t, noreplan.as_mut(), &perfect(t), trial, seed, "scripted-noreplan");
            if a.summary.achieved < 2 && b.summary.achieved < 2 {
                blocked += 1;
            }
            let mut replan = PlannerSpec::Scripted.build(t, seed, trial);
            let c = run_episode(t, replan.as_mut(), &perfect(t), trial, seed, "scripted");
            if c.summary.achieved == 2 {
                restored += 1;
            }
        }
    }
    ensure(blocked == total, || {
        format!("affected transition reached without replanning in {} of {total}", total - blocked)
    })?;
    ensure(restored == total, || format!("replanning restored only {restored} of {total}"))?;
    Ok(format!("{total} trials: affected SR 0 without replanning (100%), SR 1.0 with replanning"))
}

/// Exploration term for a sweep in `order` that stops at the open revealing
/// `hidden`, against the reference sweep in declaration order.
fn eta_oracle(cands: &[&str], hidden: usize, order: &[&str]) -> f64 {
    let ops = |seq: &[&str], stop: &str| -> Vec<(bool, String)> {
        let mut v = Vec::new();
        for c in seq {
            v.push((true, c.to_string()));
            if *c == stop {
                break;
            }
            v.push((false, c.to_string()));
        }
        v
    };
    let g = ops(order, cands[hidden]);
    let gt = ops(cands, cands[hidden]);
    let gs: BTreeSet<_> = g.iter().collect();
    let overlap = gt.iter().filter(|x| gs.contains(x)).count();
    overlap as f64 / gt.len() as f64 / g.len() as f64
}

fn memory_mechanism() -> Outcome {
    let mut cases = 0;
    let mut traces = Vec::new();
    let mut oracle_sum = 0.0;
    for c in 2..=4 {
        let cands = &COMPARTMENTS[..c];
        for hidden in 0..c {
            let t = exploration_task(cands, hidden);
            for order in permutations(cands) {
                cases += 1;
                let ids: Vec<FixtureId> = order.iter().map(|f| FixtureId::new(*f)).collect();
                let state = compile_scene(&t).map_err(|e| e.to_string())?;
                let mut env = Env::new(
                    Arc::new(t.registry().clone()),
                    state,
                    NoiseConfig::perfect(),
                    ObservationMode::Partial,
                    Default::default(),
                    0,
                );
                let out = run_memory_mechanism(&t, &mut env, Some(&ids)).map_err(|e| e.to_string())?;
                let j = order.iter().position(|f| *f == cands[hidden]).unwrap() + 1;
                ensure(out.success && out.opened == j, || {
                    format!("C={c} hidden={hidden} order={order:?}: opened {} expected {j}", out.opened)
                })?;

                let cfg = ScriptedConfig { sweep_order: Some(ids), ..ScriptedConfig::default() };
                let mut planner = ScriptedPlanner::new(TaskBrief::from_task(&t), cfg, 0);
                let mut ecfg = EpisodeConfig::for_task(&t, NoiseConfig::perfect());
                ecfg.mode = ObservationMode::Partial;
                let trace = run_episode(&t, &mut planner, &ecfg, cases, 0, "scripted");
                let x = trace.summary.exploration.as_ref().ok_or("no exploration record")?;
                let oracle = eta_oracle(cands, hidden, &order);
                let got = exploration_term(&x.pi_g, &x.pi_gt).map_err(|e| e.to_string())?;
                ensure((got - oracle).abs() <= EXACT, || {
                    format!("C={c} hidden={hidden} order={order:?}: η term {got} vs oracle {oracle}")
                })?;
                oracle_sum += oracle;
                traces.push(trace);
            }
        }
    }
    let report = MetricsReport::from_traces("scripted", &traces, false);
    let eta = report.memory.eta_exp.ok_or("no η_Exp")?;
    let oracle = oracle_sum / cases as f64;
    ensure((eta - oracle).abs() <= EXACT, || format!("η_Exp {eta} vs oracle {oracle}"))?;
    Ok(format!("{cases} (C, j, order) cases: opens = j, η_Exp {eta:.6} = oracle within {EXACT:e}"))
}

/// P(X >= k) for X ~ Binomial(n, p).
fn upper_tail(n: u32, k: u32, p: f64) -> f64 {
    let mut pmf = (1.0 - p).powi(n as i32);
    let mut tail = if k == 0 { pmf } else { 0.0 };
    for i in 1..=n {
        pmf *= (n - i + 1) as f64 / i as f64 * p / (1.0 - p);
        if i >= k {
            tail += pmf;
        }
    }
    tail.min(1.0)
}

fn memoryless_contrast() -> Outcome {
    let tasks: Vec<TaskSpec> =
        default_suite().into_iter().filter(|t| t.category == Category::MemoryExecution).collect();
    let mut base = RunConfig::new(PlannerSpec::ScriptedNoMemory, 5);
    base.noise = NoiseConfig::perfect();
    base.trials = CONTRAST_TRIALS;
    let without = run_benchmark(&tasks, &base, None);
    let with = run_benchmark(&tasks, &RunConfig { planner: PlannerSpec::Scripted, ..base.clone() }, None);
    let mut worst_p = 1.0f64;
    let (mut sr_sum, mut chance_sum) = (0.0, 0.0);
    for t in &tasks {
        let c = t.memory.as_ref().ok_or("execution task without memory spec")?.candidates.len();
        let chance = 1.0 / c as f64;
        let mine: Vec<_> = without.traces.iter().filter(|x| x.header.task == t.id).collect();
        let k = t.key_transitions.len();
        let hits = mine.iter().filter(|x| x.summary.achieved == k).count() as u32;
        let p = upper_tail(mine.len() as u32, hits, chance);
        worst_p = worst_p.min(p);
        sr_sum += hits as f64 / mine.len() as f64;
        chance_sum += chance;
        ensure(p >= CONTRAST_ALPHA, || {
            format!("{}: {hits}/{} successes exceed chance 1/{c} (p = {p:.2e})", t.id, mine.len())
        })?;
    }
    let sr_with = with.report.columns.get(&Category::MemoryExecution).ok_or("no execution column")?.sr;
    ensure(round2(sr_with) == 100.0, || format!("memory-enabled SR {sr_with:.2}"))?;
    let n = tasks.len() as f64;
    Ok(format!(
        "{} tasks x {CONTRAST_TRIALS}: memoryless success {:.3} vs chance {:.3} (min one-sided p {worst_p:.3} >= {CONTRAST_ALPHA}); with memory SR 100.00",
        tasks.len(),
        sr_sum / n,
        chance_sum / n
    ))
}

fn calibration() -> Outcome {
    let reg = Arc::new(SceneRegistry::kitchen());
    let subgoal = Subgoal::from(PrimitiveAction::pick("plate", Location::AtRegion("counter_top".into())));
    let noise = NoiseConfig { success_prob: CALIBRATION_P, drop_prob: 0.0 };
    let mut ok = 0u32;
    for trial in 0..CALIBRATION_TRIALS {
        let mut env = Env::new(
            reg.clone(),
            reg.initial_state(),
            noise,
            ObservationMode::Full,
            Default::default(),
            episode_seed(2024, "calibration", trial),
        );
        let res = run_macro(&mut env, &subgoal, None, CALIBRATION_BUDGET, u64::MAX, 0, &mut |_, _, _| 0)
            .map_err(|e| e.to_string())?;
        ensure(res.used <= CALIBRATION_BUDGET, || format!("used {} primitives", res.used))?;
        if res.completed {
            ok += 1;
        }
    }
    let rate = ok as f64 / CALIBRATION_TRIALS as f64;
    let oracle = 1.0 - (1.0 - CALIBRATION_P).powi(CALIBRATION_BUDGET as i32);
    ensure((rate - oracle).abs() <= CALIBRATION_TOLERANCE, || format!("rate {rate:.4} vs {oracle:.4}"))?;
    Ok(format!("{CALIBRATION_TRIALS} trials: per-subgoal success {rate:.4} vs 1-(1-p)^3 = {oracle:.4} ± {CALIBRATION_TOLERANCE}"))
}

fn determinism() -> Outcome {
    let tasks = default_suite();
    let mut cfg = RunConfig::new(PlannerSpec::Scripted, 31);
    cfg.trials = 2;
    let a = run_benchmark(&tasks, &cfg, None);
    let serial = RunConfig { parallelism: 1, ..cfg.clone() };
    let b = run_benchmark(&tasks, &serial, None);
    let root_a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root_b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir_a = write_archive(root_a.path(), &cfg, &tasks, &a).map_err(|e| e.to_string())?;
    let dir_b = write_archive(root_b.path(), &cfg, &tasks, &b).map_err(|e| e.to_string())?;
    for f in ["report.json", "report.csv", "report.txt"] {
        let x = std::fs::read(dir_a.join(f)).map_err(|e| e.to_string())?;
        let y = std::fs::read(dir_b.join(f)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{f} differs between runs"))?;
    }
    let replay = replay_archive(&dir_a).map_err(|e| e.to_string())?;
    ensure(replay.ok(), || format!("replay diffs: {:?}", replay.diffs))?;
    Ok(format!("{} episodes replayed with 0 diffs; reports byte-equal across runs", replay.episodes))
}

fn verifier_gate() -> Outcome {
    let corpus = negative_corpus();
    let n = corpus.len();
    let mut correct = 0;
    let mut wrong = Vec::new();
    for case in &corpus {
        let r = verify_task(&case.task);
        let first = r.step_failures.first();
        if !r.passed && first.is_some_and(|f| f.index == case.step && f.requirement() == Some(&case.violated)) {
            correct += 1;
        } else {
            wrong.push(case.task.id.clone());
        }
    }
    ensure(n >= NEGATIVE_MIN && correct == n, || format!("{correct}/{n} correct; wrong: {wrong:?}"))?;
    Ok(format!("{correct}/{n} invalid tasks rejected with the violated precondition named"))
}

/// Feeds the wrapped planner random observations instead of the real ones.
struct Substitute<P> {
    inner: P,
    rng: Mutex<ChaCha8Rng>,
    registry: SceneRegistry,
}

impl<P: Planner> Substitute<P> {
    fn noise(&self) -> Observation {
        let mut rng = self.rng.lock().unwrap();
        let reg = &self.registry;
        let regions: Vec<Location> =
            reg.fixtures.iter().flat_map(|f| f.regions.iter().map(|r| Location::AtRegion(r.id.clone()))).collect();
        let mut obs = Observation::empty();
        for o in &reg.objects {
            if rng.random_bool(0.6) {
                obs.visible_placements.insert(o.id.clone(), regions.choose(&mut *rng).unwrap().clone());
            }
        }
        for f in &reg.fixtures {
            let articulation =
                *[Articulation::Open, Articulation::Closed, Articulation::Fixed].choose(&mut *rng).unwrap();
            let power = *[Power::On, Power::Off, Power::None].choose(&mut *rng).unwrap();
            obs.fixture_states.insert(f.id.clone(), FixtureView { articulation, power });
        }
        obs.gripper = reg.objects.choose(&mut *rng).filter(|_| rng.random_bool(0.5)).map(|o| o.id.clone());
        obs.clock = rng.random_range(0..1000);
        obs
    }

    fn noise_window(&self, n: usize) -> Vec<Observation> {
        (0..n).map(|_| self.noise()).collect()
    }
}

impl<P: Planner> Planner for Substitute<P> {
    fn provenance(&self) -> Provenance {
        self.inner.provenance()
    }

    fn view(&self, _obs: &Observation) -> Observation {
        self.inner.view(&self.noise())
    }

    fn uses_memory(&self) -> bool {
        self.inner.uses_memory()
    }

    fn plan(&mut self, _obs: &Observation, memory: &MemoryBank) -> Result<Plan, PlannerError> {
        let o = self.noise();
        self.inner.plan(&o, memory)
    }

    fn resolve(
        &mut self,
        plan: &mut [Subgoal],
        index: usize,
        _obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<(), PlannerError> {
        let o = self.noise();
        self.inner.resolve(plan, index, &o, memory)
    }

    fn reflect(
        &mut self,
        window: &[Observation],
        subgoal: &Subgoal,
        index: usize,
        memory: &MemoryBank,
    ) -> Result<CompletionJudgment, PlannerError> {
        let w = self.noise_window(window.len());
        self.inner.reflect(&w, subgoal, index, memory)
    }

    fn decide(
        &mut self,
        ctx: &AnchorContext<'_>,
        _obs: &Observation,
        memory: &MemoryBank,
    ) -> Result<PlannerDecision, PlannerError> {
        let o = self.noise();
        self.inner.decide(ctx, &o, memory)
    }

    fn answer(&mut self, q: &BinaryQuestion, _obs: &Observation, memory: &MemoryBank) -> Result<bool, PlannerError> {
        let o = self.noise();
        self.inner.answer(q, &o, memory)
    }
}

fn blind_invariance() -> Outcome {
    let tasks = default_suite();
    let cfg = RunConfig::new(PlannerSpec::BlindScripted, 77);
    let mut diffs = Vec::new();
    for i in 0..SUBSTITUTIONS {
        let t = &tasks[(i as usize * 7) % tasks.len()];
        let trial = (i % 3) as u32;
        let reference = cfg.run_one(t, trial).to_jsonl();
        let seed = episode_seed(cfg.seed, &t.id, trial);
        let blind = PlannerSpec::BlindScripted.build(t, seed, trial);
        let mut wrapped = Substitute {
            inner: blind,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(1000 + i)),
            registry: t.registry().clone(),
        };
        let name = cfg.planner.to_string();
        let got = run_episode(t, &mut wrapped, &cfg.episode_config(t), trial, seed, &name).to_jsonl();
        if got != reference {
            diffs.push(format!("{}__t{trial}", t.id));
        }
    }
    ensure(diffs.is_empty(), || format!("{} diffs: {diffs:?}", diffs.len()))?;
    Ok(format!("{SUBSTITUTIONS} random observation-stream substitutions, 0 trace diffs"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle ceiling", oracle_ceiling),
        ("metric reproduction", metric_reproduction),
        ("category separation", category_separation),
        ("memory mechanism", memory_mechanism),
        ("memoryless contrast", memoryless_contrast),
        ("System-1 calibration", calibration),
        ("determinism and replay", determinism),
        ("verifier gate", verifier_gate),
        ("blind invariance", blind_invariance),
    ];
    let mut failed = 0;
    let start = Instant::now();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        let dt = t0.elapsed();
        match outcome {
            Ok(msg) => println!("PASS  {}. {name}: {msg} [{}]", i + 1, secs(dt)),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {}. {name}: {msg} [{}]", i + 1, secs(dt))
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {}", criteria.len() - failed, secs(start.elapsed()));
    if failed > 0 {
        std::process::exit(1);
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}
