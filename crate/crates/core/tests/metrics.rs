mod common;

use hsim_core::forge::{default_counts, emit_suite, ActionType, Category, PrimitiveAction};
use hsim_core::metrics::{
    achieved_from_log, exploration_metrics, success_rate, ExplorationSample, Format, MetricsError, MetricsReport,
};
use hsim_core::orchestrator::{
    run_benchmark, EpisodeHeader, EpisodeSummary, EpisodeTrace, ExplorationRecord, PlannerSpec, RunConfig, StepRecord,
    Terminal, TraceEvent,
};
use hsim_core::scene::SceneRegistry;
use hsim_core::sim::StepStatus;
use proptest::prelude::*;

/// Longest prefix of transitions that can be assigned non-decreasing
/// snapshot indices at which each holds, found by exhaustive search.
fn brute_force_achieved(snapshots: &[Vec<bool>], k: usize) -> usize {
    fn go(snapshots: &[Vec<bool>], k: usize, next: usize, from: usize) -> usize {
        if next == k {
            return 0;
        }
        let mut best = 0;
        for (i, s) in snapshots.iter().enumerate().skip(from) {
            if s[next] {
                best = best.max(1 + go(snapshots, k, next + 1, i));
            }
        }
        best
    }
    go(snapshots, k, 0, 0)
}

fn synthetic(holds: Vec<Vec<bool>>) -> EpisodeTrace {
    let k = holds[0].len();
    let header = EpisodeHeader {
        task: "synthetic".into(),
        category: Category::Ideal,
        trial: 0,
        seed: 0,
        planner: "none".into(),
        initial_holds: holds[0].clone(),
    };
    let events = holds[1..]
        .iter()
        .enumerate()
        .map(|(t, h)| {
            TraceEvent::Step(StepRecord {
                t: t as u64 + 1,
                subgoal: 0,
                primitive: PrimitiveAction::new(ActionType::Wait),
                status: StepStatus::Applied,
                violated: None,
                dropped: None,
                events: Vec::new(),
                obs: String::new(),
                holds: h.clone(),
                achieved: 0,
            })
        })
        .collect();
    let summary = EpisodeSummary {
        terminal: Terminal::PlanExhausted,
        abort_reason: None,
        achieved: 0,
        transition_times: vec![None; k],
        plan_pred: Vec::new(),
        plan_match: false,
        plan_match_multiset: false,
        executions: Vec::new(),
        primitives: holds.len() as u64 - 1,
        qa: Vec::new(),
        fired: Vec::new(),
        exploration: None,
        decision_correct: None,
    };
    EpisodeTrace { header, events, summary }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ordered_achievement_matches_exhaustive_search(
        k in 1usize..5,
        raw in prop::collection::vec(prop::collection::vec(any::<bool>(), 5), 1..8),
    ) {
        let holds: Vec<Vec<bool>> = raw.into_iter().map(|mut r| { r.truncate(k); r }).collect();
        let trace = synthetic(holds.clone());
        let expected = brute_force_achieved(&holds, k);
        prop_assert_eq!(achieved_from_log(&trace), expected);
        prop_assert!((success_rate(&trace) - expected as f64 / k as f64).abs() < 1e-12);
    }
}

fn benchmark(planner: PlannerSpec, trials: u32) -> Vec<EpisodeTrace> {
    let tasks = emit_suite(&SceneRegistry::kitchen(), &default_counts(), 6).unwrap();
    let mut cfg = RunConfig::new(planner, 3);
    cfg.trials = trials;
    run_benchmark(&tasks, &cfg, None).traces
}

#[test]
fn log_rescan_agrees_with_runtime_pointer() {
    for planner in [PlannerSpec::Scripted, PlannerSpec::ScriptedNoReplan, PlannerSpec::Random] {
        for t in benchmark(planner, 1) {
            let mut snaps = vec![t.header.initial_holds.clone()];
            snaps.extend(t.steps().map(|s| s.holds.clone()));
            let k = t.header.initial_holds.len();
            assert_eq!(achieved_from_log(&t), brute_force_achieved(&snaps, k), "{}", t.file_name());
            if t.summary.terminal != Terminal::Aborted {
                assert_eq!(achieved_from_log(&t), t.summary.achieved, "{}", t.file_name());
            }
        }
    }
}

#[test]
fn report_ignores_trace_order() {
    let traces = benchmark(PlannerSpec::Scripted, 2);
    let a = MetricsReport::from_traces("scripted", &traces, false);
    let mut shuffled = traces.clone();
    shuffled.reverse();
    shuffled.rotate_left(7);
    let b = MetricsReport::from_traces("scripted", &shuffled, false);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.render(Format::Table), b.render(Format::Table));
}

#[test]
fn efficiency_is_success_over_length_everywhere() {
    let r = MetricsReport::from_traces("scripted", &benchmark(PlannerSpec::Scripted, 2), false);
    for c in r.overall.iter().chain(r.columns.values()) {
        let len = c.len.unwrap();
        assert!((c.eta.unwrap() - c.sr / len).abs() < 1e-12);
        assert!(c.sr_ci.0 <= c.sr + 1e-9 && c.sr <= c.sr_ci.1 + 1e-9);
    }
    let avg = r.overall.as_ref().unwrap();
    let pooled = r.scores.iter().map(|s| s.sr).sum::<f64>() / r.scores.len() as f64;
    assert!((avg.sr - 100.0 * pooled).abs() < 1e-9);
}

#[test]
fn exploration_efficiency_bounds() {
    let open = |c: &str| PrimitiveAction::open(c);
    let gt = vec![open("a"), open("b"), open("c")];
    for n in 1..=3 {
        let g = &gt[..n];
        let m =
            exploration_metrics(&[ExplorationSample { pi_g: g, pi_gt: &gt, located: true, decision_correct: true }])
                .unwrap();
        assert!((m.comp - n as f64 / 3.0).abs() < 1e-12);
        assert!((m.eta - 1.0 / 3.0).abs() < 1e-12);
        assert!(m.eta <= 1.0 / n as f64 + 1e-12);
    }
    let empty: Vec<PrimitiveAction> = Vec::new();
    let s = ExplorationSample { pi_g: &empty, pi_gt: &gt, located: false, decision_correct: false };
    assert_eq!(exploration_metrics(&[s]), Err(MetricsError::EmptyPlan));
    assert_eq!(exploration_metrics(&[]), Err(MetricsError::EmptyPlan));
}

#[test]
fn empty_exploration_is_excluded_and_noted() {
    let traces = benchmark(PlannerSpec::Scripted, 1);
    let mut t = traces.into_iter().find(|t| t.header.category == Category::MemoryExploration).unwrap();
    t.summary.exploration =
        Some(ExplorationRecord { pi_g: Vec::new(), pi_gt: vec![PrimitiveAction::open("x")], located: false });
    let r = MetricsReport::from_traces("scripted", &[t], false);
    assert_eq!(r.memory.empty_exploration, 1);
    assert_eq!(r.memory.eta_exp, None);
    assert_eq!(r.memory.comp_exp, Some(0.0));
    assert!(r.footer().iter().any(|l| l.contains("excludes 1 exploration episode")));
}

fn table_numbers(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(2)
        .take_while(|l| !l.is_empty())
        .map(|l| {
            l[12..]
                .split(|c: char| c == '|' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect()
        })
        .collect()
}

#[test]
fn table_and_csv_show_the_same_numbers() {
    let r = MetricsReport::from_traces("gt", &benchmark(PlannerSpec::Gt, 1), false);
    let table = r.render(Format::Table);
    let csv = r.render(Format::Csv);
    let csv_main: Vec<Vec<String>> = csv
        .lines()
        .filter(|l| l.starts_with("main,"))
        .map(|l| l.split(',').skip(2).map(|c| if c.is_empty() { "—".to_owned() } else { c.to_owned() }).collect())
        .collect();
    assert_eq!(table_numbers(&table), csv_main);
    assert!(csv.lines().next().unwrap().starts_with("section,metric,Avg,"));
}

#[test]
fn missing_memory_section_renders_as_dashes() {
    let only_ideal: Vec<EpisodeTrace> =
        benchmark(PlannerSpec::Gt, 1).into_iter().filter(|t| t.header.category == Category::Ideal).collect();
    let r = MetricsReport::from_traces("gt", &only_ideal, false);
    let table = r.render(Format::Table);
    let memory: Vec<&str> = table.lines().skip_while(|l| *l != "Memory").skip(1).take(6).collect();
    assert_eq!(memory.len(), 6);
    assert!(memory.iter().all(|l| l.trim_end().ends_with('—')));
    assert!(r.render(Format::Csv).lines().filter(|l| l.starts_with("memory,")).all(|l| l.ends_with(',')));
}

#[test]
fn compare_reports_signed_deltas() {
    let a = MetricsReport::from_traces("gt", &benchmark(PlannerSpec::Gt, 1), false);
    let b = MetricsReport::from_traces("random", &benchmark(PlannerSpec::Random, 1), false);
    let same = a.compare(&a);
    assert!(same.lines().skip(2).all(|l| l[12..].split_whitespace().all(|c| c == "0.00" || c == "—")));
    let diff = a.compare(&b);
    let sr_row = diff.lines().find(|l| l.starts_with("SR ")).unwrap();
    assert!(sr_row.split_whitespace().nth(1).unwrap().starts_with('-'));
    assert_eq!(MetricsReport::from_json(&a.to_json()).unwrap(), a);
}
