use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::forge::Category;
use crate::orchestrator::{EpisodeTrace, Terminal};

use super::formulas::{
    achieved_from_log, action_completion_accuracy, completeness, exploration_term, fmt2, mean_len, plan_accuracy,
    plan_efficiency, wilson,
};

/// Scored view of one episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub task: String,
    pub category: Category,
    pub trial: u32,
    pub k: usize,
    pub achieved: usize,
    pub sr: f64,
    pub plan_match: bool,
    /// Executed subgoal count, retries and replacements included.
    pub actions: usize,
    pub aborted: bool,
    pub qa: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryScore {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_term: Option<f64>,
    pub pi_g_len: usize,
    pub located: bool,
    pub decision_correct: bool,
}

impl TaskScore {
    pub fn from_trace(trace: &EpisodeTrace, multiset_plan_match: bool) -> Self {
        let s = &trace.summary;
        let k = trace.header.initial_holds.len();
        let achieved = achieved_from_log(trace);
        let memory = trace.header.category.needs_memory().then(|| {
            let (comp, eta_term, len, located) = match &s.exploration {
                Some(x) => (
                    Some(completeness(&x.pi_g, &x.pi_gt)),
                    exploration_term(&x.pi_g, &x.pi_gt).ok(),
                    x.pi_g.len(),
                    x.located,
                ),
                None => (None, None, 0, false),
            };
            MemoryScore { comp, eta_term, pi_g_len: len, located, decision_correct: s.decision_correct == Some(true) }
        });
        Self {
            task: trace.header.task.clone(),
            category: trace.header.category,
            trial: trace.header.trial,
            k,
            achieved,
            sr: if k == 0 { 0.0 } else { achieved as f64 / k as f64 },
            plan_match: if multiset_plan_match { s.plan_match_multiset } else { s.plan_match },
            actions: s.executions.len(),
            aborted: s.terminal == Terminal::Aborted,
            qa: s.qa.iter().map(|q| q.correct()).collect(),
            memory,
        }
    }
}

/// Headline metrics for one column. Rates are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub episodes: usize,
    pub aborted: usize,
    pub sr: f64,
    /// 95% Wilson interval on pooled transitions.
    pub sr_ci: (f64, f64),
    pub acc_p: f64,
    pub len: Option<f64>,
    pub eta: Option<f64>,
    pub acc_c: Option<f64>,
    pub questions: usize,
}

impl ColumnStats {
    pub fn from_scores(scores: &[&TaskScore]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let n = scores.len();
        let sr = 100.0 * scores.iter().map(|s| s.sr).sum::<f64>() / n as f64;
        let (hit, total) = scores.iter().fold((0, 0), |(h, t), s| (h + s.achieved, t + s.k));
        let (lo, hi) = wilson(hit, total);
        let lens: Vec<usize> = scores.iter().filter(|s| !s.aborted).map(|s| s.actions).collect();
        let len = mean_len(&lens).ok().filter(|l| *l > 0.0);
        let qa: Vec<bool> = scores.iter().flat_map(|s| s.qa.iter().copied()).collect();
        Some(Self {
            episodes: n,
            aborted: scores.iter().filter(|s| s.aborted).count(),
            sr,
            sr_ci: (100.0 * lo, 100.0 * hi),
            acc_p: plan_accuracy(&scores.iter().map(|s| s.plan_match).collect::<Vec<_>>()),
            len,
            eta: len.and_then(|l| plan_efficiency(sr, l).ok()),
            acc_c: action_completion_accuracy(&qa),
            questions: qa.len(),
        })
    }
}

/// Memory-category metrics. Rates are percentages; `None` when no episode applies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryStats {
    pub sr_exp: Option<f64>,
    pub sr_exp_only: Option<f64>,
    pub comp_exp: Option<f64>,
    pub eta_exp: Option<f64>,
    pub sr_exe: Option<f64>,
    pub acc_dec: Option<f64>,
    /// Exploration episodes left out of the efficiency mean for an empty sub-plan.
    pub empty_exploration: usize,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl MemoryStats {
    pub fn from_scores(scores: &[TaskScore]) -> Self {
        let of = |c: Category| scores.iter().filter(move |s| s.category == c);
        let exp: Vec<&TaskScore> = of(Category::MemoryExploration).collect();
        let exploring: Vec<&MemoryScore> =
            scores.iter().filter(|s| s.category.explores()).filter_map(|s| s.memory.as_ref()).collect();
        let pct = |b: bool| if b { 100.0 } else { 0.0 };
        Self {
            sr_exp: mean(exp.iter().map(|s| 100.0 * s.sr)),
            sr_exp_only: mean(exploring.iter().map(|m| pct(m.located))),
            comp_exp: mean(exploring.iter().filter_map(|m| m.comp)),
            eta_exp: mean(exploring.iter().filter_map(|m| m.eta_term)),
            sr_exe: mean(of(Category::MemoryExecution).map(|s| 100.0 * s.sr)),
            acc_dec: mean(scores.iter().filter_map(|s| s.memory.as_ref()).map(|m| pct(m.decision_correct))),
            empty_exploration: exploring.iter().filter(|m| m.pi_g_len == 0).count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub planner: String,
    pub multiset_plan_match: bool,
    pub overall: Option<ColumnStats>,
    pub columns: BTreeMap<Category, ColumnStats>,
    pub memory: MemoryStats,
    /// Aborted episodes as `task__tN: reason`.
    pub aborted: Vec<String>,
    pub scores: Vec<TaskScore>,
}

/// Reference (SR, Len, printed η) triples used by the efficiency audit in the footer.
pub const ETA_AUDIT: [(f64, f64, f64); 5] =
    [(16.04, 10.67, 1.50), (15.10, 10.73, 1.41), (11.37, 8.33, 1.36), (11.19, 8.30, 1.34), (9.33, 6.95, 1.32)];

impl MetricsReport {
    /// Aggregates traces in any order; scores are sorted before folding.
    pub fn from_traces(planner: &str, traces: &[EpisodeTrace], multiset_plan_match: bool) -> Self {
        let mut scores: Vec<TaskScore> = traces.iter().map(|t| TaskScore::from_trace(t, multiset_plan_match)).collect();
        scores.sort_by(|a, b| (&a.task, a.trial).cmp(&(&b.task, b.trial)));
        let mut aborted: Vec<String> = traces
            .iter()
            .filter(|t| t.summary.terminal == Terminal::Aborted)
            .map(|t| {
                format!(
                    "{}__t{}: {}",
                    t.header.task,
                    t.header.trial,
                    t.summary.abort_reason.as_deref().unwrap_or("aborted")
                )
            })
            .collect();
        aborted.sort();
        let all: Vec<&TaskScore> = scores.iter().collect();
        let columns = Category::COLUMNS
            .into_iter()
            .filter_map(|c| {
                let sel: Vec<&TaskScore> = scores.iter().filter(|s| s.category == c).collect();
                ColumnStats::from_scores(&sel).map(|st| (c, st))
            })
            .collect();
        Self {
            planner: planner.to_owned(),
            multiset_plan_match,
            overall: ColumnStats::from_scores(&all),
            columns,
            memory: MemoryStats::from_scores(&scores),
            aborted,
            scores,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn rows(&self) -> Vec<(&'static str, Vec<Option<f64>>)> {
        let cols: Vec<Option<&ColumnStats>> = std::iter::once(self.overall.as_ref())
            .chain(Category::COLUMNS.iter().map(|c| self.columns.get(c)))
            .collect();
        let row = |f: &dyn Fn(&ColumnStats) -> Option<f64>| cols.iter().map(|c| c.and_then(f)).collect::<Vec<_>>();
        vec![
            ("SR", row(&|c| Some(c.sr))),
            ("SR CI low", row(&|c| Some(c.sr_ci.0))),
            ("SR CI high", row(&|c| Some(c.sr_ci.1))),
            ("Acc_P", row(&|c| Some(c.acc_p))),
            ("Len", row(&|c| c.len)),
            ("η", row(&|c| c.eta)),
            ("Acc_C", row(&|c| c.acc_c)),
            ("Episodes", row(&|c| Some(c.episodes as f64))),
            ("Aborted", row(&|c| Some(c.aborted as f64))),
        ]
    }

    fn memory_rows(&self) -> Vec<(&'static str, Option<f64>)> {
        let m = &self.memory;
        vec![
            ("SR_Exp", m.sr_exp),
            ("SR_Exp-only", m.sr_exp_only),
            ("Comp_Exp", m.comp_exp.map(|c| 100.0 * c)),
            ("η_Exp", m.eta_exp),
            ("SR_Exe", m.sr_exe),
            ("Acc_Dec", m.acc_dec),
        ]
    }

    pub fn footer(&self) -> Vec<String> {
        let mut out = vec![if self.multiset_plan_match {
            "Acc_P: plans compared as multisets of canonical subgoals (order ignored).".to_owned()
        } else {
            "Acc_P: exact, order-sensitive match of canonical subgoals.".to_owned()
        }];
        out.push("Comp_Exp: multiset overlap of canonical subgoals, order-insensitive.".into());
        out.push(
            "SR: ordered achievement of key transitions; CI is a 95% Wilson interval on pooled transitions.".into(),
        );
        if self.memory.empty_exploration > 0 {
            out.push(format!(
                "η_Exp excludes {} exploration episode(s) with an empty sub-plan.",
                self.memory.empty_exploration
            ));
        }
        let audit: Vec<String> = ETA_AUDIT
            .iter()
            .map(|&(sr, len, printed)| {
                let eta = sr / len;
                let note = if (eta - printed).abs() > 0.01 {
                    format!(" (reference value {printed:.2}, off by {:.3})", eta - printed)
                } else {
                    String::new()
                };
                format!("{sr:.2}/{len:.2} = {}{note}", fmt2(eta))
            })
            .collect();
        out.push(format!("η audit: {}", audit.join("; ")));
        if !self.aborted.is_empty() {
            out.push(format!("Aborted episodes (scored SR = 0): {}", self.aborted.join(", ")));
        }
        out
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.render_table(),
            Format::Csv => self.render_csv(),
        }
    }

    fn header() -> Vec<&'static str> {
        std::iter::once("Avg").chain(Category::COLUMNS.iter().map(|c| c.short())).collect()
    }

    fn render_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "—".to_owned(), fmt2);
        let mut out = String::new();
        let _ = writeln!(out, "Planner: {}", self.planner);
        let head = Self::header();
        let _ = write!(out, "{:<12}", "Metric");
        for (i, h) in head.iter().enumerate() {
            let sep = if matches!(i, 1 | 3 | 5 | 6) { " |" } else { "" };
            let _ = write!(out, "{sep}{h:>9}");
        }
        out.push('\n');
        for (name, vals) in self.rows() {
            let _ = write!(out, "{name:<12}");
            for (i, v) in vals.into_iter().enumerate() {
                let sep = if matches!(i, 1 | 3 | 5 | 6) { " |" } else { "" };
                let _ = write!(out, "{sep}{:>9}", cell(v));
            }
            out.push('\n');
        }
        out.push('\n');
        let _ = writeln!(out, "Memory");
        for (name, v) in self.memory_rows() {
            let _ = writeln!(out, "{name:<12}{:>9}", cell(v));
        }
        out.push('\n');
        for line in self.footer() {
            let _ = writeln!(out, "{line}");
        }
        out
    }

    fn render_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(String::new, fmt2);
        let mut out = String::new();
        let _ = writeln!(out, "section,metric,{}", Self::header().join(","));
        for (name, vals) in self.rows() {
            let cells: Vec<String> = vals.into_iter().map(cell).collect();
            let _ = writeln!(out, "main,{name},{}", cells.join(","));
        }
        for (name, v) in self.memory_rows() {
            let _ = writeln!(out, "memory,{name},{}", cell(v));
        }
        out
    }

    /// Per-metric deltas `other - self` for every column both reports share.
    pub fn compare(&self, other: &MetricsReport) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Δ ({} → {})", self.planner, other.planner);
        let head = Self::header();
        let _ = writeln!(out, "{:<12}{}", "Metric", head.iter().map(|h| format!("{h:>9}")).collect::<String>());
        for ((name, a), (_, b)) in self.rows().into_iter().zip(other.rows()) {
            let cells: String = a
                .into_iter()
                .zip(b)
                .map(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => format!("{:>9}", signed(y - x)),
                    _ => format!("{:>9}", "—"),
                })
                .collect();
            let _ = writeln!(out, "{name:<12}{cells}");
        }
        for ((name, a), (_, b)) in self.memory_rows().into_iter().zip(other.memory_rows()) {
            let cell = match (a, b) {
                (Some(x), Some(y)) => signed(y - x),
                _ => "—".to_owned(),
            };
            let _ = writeln!(out, "{name:<12}{cell:>9}");
        }
        out
    }
}

fn signed(x: f64) -> String {
    let s = fmt2(x);
    if s.starts_with('-') || s == "0.00" {
        s
    } else {
        format!("+{s}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}
