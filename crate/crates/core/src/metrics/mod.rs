//! Scoring formulas, per-episode scores, aggregate reports and rendering.

mod formulas;
mod report;

pub use formulas::{
    achieved_from_log, action_completion_accuracy, completeness, exploration_metrics, exploration_term, fmt2, mean_len,
    plan_accuracy, plan_efficiency, round2, success_rate, wilson, ExplorationMetrics, ExplorationSample, MetricsError,
};
pub use report::{ColumnStats, Format, MemoryScore, MemoryStats, MetricsReport, TaskScore, ETA_AUDIT};
