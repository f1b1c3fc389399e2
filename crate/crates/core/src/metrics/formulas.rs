use std::collections::BTreeMap;

use thiserror::Error;

use crate::forge::PrimitiveAction;
use crate::orchestrator::EpisodeTrace;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("efficiency undefined: no completed episodes or zero mean length")]
    DivisionDomain,
    #[error("exploration plan is empty")]
    EmptyPlan,
}

/// Ordered-achievement count recomputed from the trace's predicate log: the
/// pointer advances past transition k only while every earlier one has fired.
pub fn achieved_from_log(trace: &EpisodeTrace) -> usize {
    let k = trace.header.initial_holds.len();
    let mut ptr = 0;
    let mut scan = |holds: &[bool]| {
        while ptr < k && holds.get(ptr).copied().unwrap_or(false) {
            ptr += 1;
        }
    };
    scan(&trace.header.initial_holds);
    for s in trace.steps() {
        scan(&s.holds);
    }
    ptr
}

/// Fraction of key transitions achieved in order.
pub fn success_rate(trace: &EpisodeTrace) -> f64 {
    let k = trace.header.initial_holds.len();
    if k == 0 {
        return 0.0;
    }
    achieved_from_log(trace) as f64 / k as f64
}

/// Percentage of exact plan matches.
pub fn plan_accuracy(matches: &[bool]) -> f64 {
    if matches.is_empty() {
        return 0.0;
    }
    100.0 * matches.iter().filter(|m| **m).count() as f64 / matches.len() as f64
}

/// Success rate (percent) divided by mean plan length.
pub fn plan_efficiency(sr_percent: f64, mean_len: f64) -> Result<f64, MetricsError> {
    if mean_len.is_nan() || mean_len <= 0.0 {
        return Err(MetricsError::DivisionDomain);
    }
    Ok(sr_percent / mean_len)
}

/// Mean of executed subgoal counts over completed episodes.
pub fn mean_len(lengths: &[usize]) -> Result<f64, MetricsError> {
    if lengths.is_empty() {
        return Err(MetricsError::DivisionDomain);
    }
    Ok(lengths.iter().sum::<usize>() as f64 / lengths.len() as f64)
}

/// Percentage of correctly answered questions; `None` when none were answered.
pub fn action_completion_accuracy(outcomes: &[bool]) -> Option<f64> {
    if outcomes.is_empty() {
        return None;
    }
    Some(100.0 * outcomes.iter().filter(|c| **c).count() as f64 / outcomes.len() as f64)
}

/// Multiset overlap of `pi_g` with `pi_gt`, normalized by `|pi_gt|`.
pub fn completeness(pi_g: &[PrimitiveAction], pi_gt: &[PrimitiveAction]) -> f64 {
    if pi_gt.is_empty() {
        return 0.0;
    }
    let key = |a: &PrimitiveAction| serde_json::to_string(a).expect("action serializes");
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for a in pi_gt {
        *counts.entry(key(a)).or_default() += 1;
    }
    let mut hit = 0;
    for a in pi_g {
        if let Some(c) = counts.get_mut(&key(a)) {
            if *c > 0 {
                *c -= 1;
                hit += 1;
            }
        }
    }
    hit as f64 / pi_gt.len() as f64
}

/// One episode's exploration term: completeness over predicted length.
pub fn exploration_term(pi_g: &[PrimitiveAction], pi_gt: &[PrimitiveAction]) -> Result<f64, MetricsError> {
    if pi_g.is_empty() {
        return Err(MetricsError::EmptyPlan);
    }
    Ok(completeness(pi_g, pi_gt) / pi_g.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplorationMetrics {
    pub comp: f64,
    pub eta: f64,
    pub sr_only: f64,
    pub acc_dec: f64,
}

/// Per-episode exploration record used by [`exploration_metrics`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExplorationSample<'a> {
    pub pi_g: &'a [PrimitiveAction],
    pub pi_gt: &'a [PrimitiveAction],
    pub located: bool,
    pub decision_correct: bool,
}

/// Strict form: every episode must have a non-empty exploration plan.
/// Rates are fractions in [0, 1].
pub fn exploration_metrics(samples: &[ExplorationSample<'_>]) -> Result<ExplorationMetrics, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyPlan);
    }
    let n = samples.len() as f64;
    let mut comp = 0.0;
    let mut eta = 0.0;
    for s in samples {
        eta += exploration_term(s.pi_g, s.pi_gt)?;
        comp += completeness(s.pi_g, s.pi_gt);
    }
    Ok(ExplorationMetrics {
        comp: comp / n,
        eta: eta / n,
        sr_only: samples.iter().filter(|s| s.located).count() as f64 / n,
        acc_dec: samples.iter().filter(|s| s.decision_correct).count() as f64 / n,
    })
}

/// Wilson score interval for `successes` out of `n` at 95% confidence, as fractions.
pub fn wilson(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = p + z * z / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { ((centre - half) / denom).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { ((centre + half) / denom).min(1.0) };
    (lo, hi)
}

/// Round half to even at two decimals; values within 1e-9 of a tie count as ties.
pub fn round2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let floor = scaled.floor();
    let frac = scaled - floor;
    let r = if (frac - 0.5).abs() < 1e-9 {
        if floor.rem_euclid(2.0) == 0.0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        scaled.round()
    };
    r / 100.0
}

pub fn fmt2(x: f64) -> String {
    let r = round2(x);
    format!("{:.2}", if r == 0.0 { 0.0 } else { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::FixtureId;

    fn open(c: &str) -> PrimitiveAction {
        PrimitiveAction::open(FixtureId::new(c))
    }

    #[test]
    fn efficiency_arithmetic() {
        assert!((plan_efficiency(16.04, 10.67).unwrap() - 1.503).abs() < 1e-3);
        assert_eq!(plan_efficiency(10.0, 0.0), Err(MetricsError::DivisionDomain));
        assert_eq!(mean_len(&[]), Err(MetricsError::DivisionDomain));
    }

    #[test]
    fn plan_accuracy_counts() {
        assert_eq!(plan_accuracy(&[true; 5]), 100.0);
        assert_eq!(plan_accuracy(&[true, true, false, true, true]), 80.0);
    }

    #[test]
    fn qa_accuracy() {
        assert_eq!(action_completion_accuracy(&[]), None);
        assert_eq!(action_completion_accuracy(&[true, false]), Some(50.0));
    }

    #[test]
    fn completeness_examples() {
        let gt = [open("c1"), open("c2"), open("c3")];
        let g = [open("c1"), open("c3")];
        assert!((completeness(&g, &gt) - 2.0 / 3.0).abs() < 1e-12);
        assert!((exploration_term(&g, &gt).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((exploration_term(&gt, &gt).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(exploration_term(&[], &gt), Err(MetricsError::EmptyPlan));
        let dup = [open("c1"), open("c1")];
        assert_eq!(completeness(&dup, &gt), 1.0 / 3.0);
    }

    #[test]
    fn exploration_eta_bounded() {
        let gt = [open("c1")];
        let s = ExplorationSample { pi_g: &gt, pi_gt: &gt, located: true, decision_correct: true };
        let m = exploration_metrics(&[s]).unwrap();
        assert_eq!(m.eta, 1.0);
        assert_eq!(m.comp, 1.0);
    }

    #[test]
    fn half_even() {
        assert_eq!(fmt2(0.125), "0.12");
        assert_eq!(fmt2(0.135), "0.14");
        assert_eq!(fmt2(1.005), "1.00");
        assert_eq!(fmt2(2.675), "2.68");
        assert_eq!(fmt2(1.503), "1.50");
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(100.0), "100.00");
    }

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        assert_eq!(wilson(10, 10).1, 1.0);
    }
}
