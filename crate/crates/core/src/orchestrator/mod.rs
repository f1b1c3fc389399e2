//! The anchor-aligned System-1/System-2 loop, batch execution and trace archives.

mod anchor;
mod archive;
mod batch;
mod episode;
mod trace;

pub use anchor::{AnchorMode, AnchorPolicy, Budget, DEFAULT_MAX_STEPS};
pub use archive::{
    config_hash, read_archive, replay_archive, replay_episode, write_archive, write_reports, Archive, ArchiveError,
    ArchiveManifest, ReplayReport,
};
pub use batch::{run_benchmark, BenchmarkRun, PlannerSpec, RunConfig, DEFAULT_TRIALS};
pub use episode::{default_mode, run_episode, run_macro, EpisodeConfig, MacroResult};
pub use trace::{
    AnchorRecord, EpisodeHeader, EpisodeSummary, EpisodeTrace, ExplorationRecord, QaRecord, StepRecord, Terminal,
    TraceEvent, TraceLine,
};
