use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scene::SceneRegistry;
use crate::seed::split;

use super::generate::generate_with_id;
use super::{Category, ForgeError, TaskSpec, TemplateLibrary};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub id: String,
    pub category: Category,
    pub seed: u64,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub seed: u64,
    pub registry: String,
    pub tasks: Vec<SuiteEntry>,
}

/// Default suite size per category.
pub const DEFAULT_PER_CATEGORY: usize = 10;

pub fn default_counts() -> BTreeMap<Category, usize> {
    Category::ALL.into_iter().map(|c| (c, DEFAULT_PER_CATEGORY)).collect()
}

/// Generates `counts[c]` verified tasks per category. Each task has its own
/// seed stream, so the suite is identical however it is scheduled.
pub fn emit_suite(
    registry: &SceneRegistry,
    counts: &BTreeMap<Category, usize>,
    seed: u64,
) -> Result<Vec<TaskSpec>, ForgeError> {
    let library = TemplateLibrary::default();
    let jobs: Vec<(Category, usize)> = Category::ALL
        .into_iter()
        .flat_map(|c| (0..counts.get(&c).copied().unwrap_or(0)).map(move |i| (c, i)))
        .collect();
    jobs.par_iter()
        .map(|&(c, i)| {
            let id = format!("{}-{i:02}", c.prefix());
            let task_seed = split(seed, &[c.slug(), &i.to_string()]);
            generate_with_id(registry, c, &library, task_seed, &id)
        })
        .collect()
}

fn io(e: std::io::Error, path: &Path) -> ForgeError {
    ForgeError::Io(format!("{}: {e}", path.display()))
}

/// Writes `manifest.json` and `tasks/<id>.json` under `dir`.
pub fn write_suite(dir: &Path, tasks: &[TaskSpec], seed: u64) -> Result<SuiteManifest, ForgeError> {
    let task_dir = dir.join("tasks");
    fs::create_dir_all(&task_dir).map_err(|e| io(e, &task_dir))?;
    let mut entries = Vec::new();
    for t in tasks {
        let file = format!("tasks/{}.json", t.id);
        let path = dir.join(&file);
        fs::write(&path, t.to_json() + "\n").map_err(|e| io(e, &path))?;
        entries.push(SuiteEntry { id: t.id.clone(), category: t.category, seed: t.seed, file });
    }
    let manifest = SuiteManifest {
        seed,
        registry: tasks.first().map(|t| t.registry().name.clone()).unwrap_or_default(),
        tasks: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| io(e, &path))?;
    Ok(manifest)
}

pub fn load_suite(dir: &Path) -> Result<(SuiteManifest, Vec<TaskSpec>), ForgeError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| io(e, &path))?;
    let manifest: SuiteManifest = serde_json::from_str(&text).map_err(|e| ForgeError::Parse(e.to_string()))?;
    let tasks = manifest
        .tasks
        .iter()
        .map(|e| {
            let p = dir.join(&e.file);
            let t = TaskSpec::from_json(&fs::read_to_string(&p).map_err(|err| io(err, &p))?)?;
            if t.id != e.id {
                return Err(ForgeError::Invalid(format!("{} holds task {}", e.file, t.id)));
            }
            Ok(t)
        })
        .collect::<Result<_, _>>()?;
    Ok((manifest, tasks))
}
