use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::forge::TaskSpec;
use crate::metrics::{Format, MetricsReport};

use super::batch::{BenchmarkRun, RunConfig};
use super::trace::EpisodeTrace;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed archive file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ArchiveError + '_ {
    move |source| ArchiveError::Io { path: path.to_owned(), source }
}

fn write(path: &Path, text: &str) -> Result<(), ArchiveError> {
    fs::write(path, text).map_err(io(path))
}

fn read(path: &Path) -> Result<String, ArchiveError> {
    fs::read_to_string(path).map_err(io(path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveManifest {
    pub config_hash: String,
    pub config: RunConfig,
    pub tasks: Vec<String>,
    /// Episode files relative to the archive root, sorted.
    pub episodes: Vec<String>,
    pub partial: bool,
}

/// Content address of a run: config plus the exact task set.
pub fn config_hash(cfg: &RunConfig, tasks: &[TaskSpec]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    for t in tasks {
        h.update(serde_json::to_vec(t).expect("task serializes"));
    }
    hex::encode(&h.finalize()[..8])
}

/// Writes `<root>/<config-hash>/` and returns that directory.
pub fn write_archive(
    root: &Path,
    cfg: &RunConfig,
    tasks: &[TaskSpec],
    run: &BenchmarkRun,
) -> Result<PathBuf, ArchiveError> {
    let hash = config_hash(cfg, tasks);
    let dir = root.join(&hash);
    let episodes_dir = dir.join("episodes");
    fs::create_dir_all(&episodes_dir).map_err(io(&episodes_dir))?;
    let mut episodes = Vec::new();
    for t in &run.traces {
        let rel = format!("episodes/{}", t.file_name());
        write(&dir.join(&rel), &t.to_jsonl())?;
        episodes.push(rel);
    }
    episodes.sort();
    let manifest = ArchiveManifest {
        config_hash: hash,
        config: cfg.clone(),
        tasks: tasks.iter().map(|t| t.id.clone()).collect(),
        episodes,
        partial: run.partial,
    };
    write(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
    write(&dir.join("tasks.json"), &serde_json::to_string_pretty(tasks).expect("tasks serialize"))?;
    write_reports(&dir, &run.report)?;
    Ok(dir)
}

pub fn write_reports(dir: &Path, report: &MetricsReport) -> Result<(), ArchiveError> {
    write(&dir.join("report.json"), &report.to_json())?;
    write(&dir.join("report.csv"), &report.render(Format::Csv))?;
    write(&dir.join("report.txt"), &report.render(Format::Table))
}

#[derive(Clone, Debug)]
pub struct Archive {
    pub dir: PathBuf,
    pub manifest: ArchiveManifest,
    pub tasks: Vec<TaskSpec>,
    pub traces: Vec<EpisodeTrace>,
}

pub fn read_archive(dir: &Path) -> Result<Archive, ArchiveError> {
    let malformed = |path: PathBuf, message: String| ArchiveError::Malformed { path, message };
    let mpath = dir.join("manifest.json");
    let manifest: ArchiveManifest =
        serde_json::from_str(&read(&mpath)?).map_err(|e| malformed(mpath.clone(), e.to_string()))?;
    let tpath = dir.join("tasks.json");
    let tasks: Vec<TaskSpec> =
        serde_json::from_str(&read(&tpath)?).map_err(|e| malformed(tpath.clone(), e.to_string()))?;
    let mut traces = Vec::new();
    for rel in &manifest.episodes {
        let p = dir.join(rel);
        traces.push(EpisodeTrace::from_jsonl(&read(&p)?).map_err(|e| malformed(p.clone(), e))?);
    }
    Ok(Archive { dir: dir.to_owned(), manifest, tasks, traces })
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub episodes: usize,
    /// One line per episode whose regenerated trace differs from the stored bytes.
    pub diffs: Vec<String>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Re-executes one stored episode file and compares bytes.
pub fn replay_episode(cfg: &RunConfig, tasks: &[TaskSpec], path: &Path) -> Result<Option<String>, ArchiveError> {
    let stored = read(path)?;
    let trace = EpisodeTrace::from_jsonl(&stored)
        .map_err(|message| ArchiveError::Malformed { path: path.to_owned(), message })?;
    let Some(task) = tasks.iter().find(|t| t.id == trace.header.task) else {
        return Ok(Some(format!("{}: task {} not in archive", path.display(), trace.header.task)));
    };
    let again = cfg.run_one(task, trace.header.trial).to_jsonl();
    if again == stored {
        return Ok(None);
    }
    let line = stored
        .lines()
        .zip(again.lines())
        .position(|(a, b)| a != b)
        .map_or_else(|| stored.lines().count().min(again.lines().count()) + 1, |i| i + 1);
    Ok(Some(format!("{}: first difference at line {line}", path.display())))
}

pub fn replay_archive(dir: &Path) -> Result<ReplayReport, ArchiveError> {
    let archive = read_archive(dir)?;
    let mut out = ReplayReport::default();
    for rel in &archive.manifest.episodes {
        out.episodes += 1;
        if let Some(d) = replay_episode(&archive.manifest.config, &archive.tasks, &dir.join(rel))? {
            out.diffs.push(d);
        }
    }
    Ok(out)
}
