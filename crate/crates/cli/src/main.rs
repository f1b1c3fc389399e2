use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hsim_core::config::HarnessConfig;
use hsim_core::forge::{default_counts, emit_suite, load_suite, verify_task, write_suite, Category, TaskSpec};
use hsim_core::metrics::{Format, MetricsReport};
use hsim_core::orchestrator::{
    read_archive, replay_archive, replay_episode, run_benchmark, write_archive, PlannerSpec, RunConfig,
};
use hsim_core::planner::{probe, ExternalConfig};
use hsim_core::scene::SceneRegistry;
use hsim_core::sim::NoiseConfig;

#[derive(Parser)]
#[command(name = "hsim", version, about = "Symbolic household benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a verified task suite.
    Gen(GenArgs),
    /// Verify a single task file.
    Verify(VerifyArgs),
    /// Run a benchmark and write a content-addressed archive.
    Run(RunArgs),
    /// Re-execute archived episodes and diff them against the stored traces.
    Replay(ReplayArgs),
    /// Render or compare archive reports.
    Report(ReportArgs),
    /// Check an external planner endpoint with a fixture request.
    Probe(ProbeArgs),
    /// Task generation commands.
    #[command(subcommand)]
    Forge(ForgeCommand),
    /// Benchmark commands.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Subcommand)]
enum ForgeCommand {
    Gen(GenArgs),
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum BenchCommand {
    Run(RunArgs),
    Replay(ReplayArgs),
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Root seed for the suite.
    #[arg(long)]
    seed: u64,
    /// Output suite directory.
    #[arg(long, default_value = "suite")]
    out: PathBuf,
    /// Scene registry JSON; the built-in kitchen when omitted.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Generate only this category.
    #[arg(long)]
    category: Option<Category>,
    /// Tasks per category.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Task JSON file.
    #[arg(long)]
    task: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Harness configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; required unless the config sets one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long)]
    archive: Option<PathBuf>,
    /// gt, random, scripted, scripted-nomemory, scripted-noreplan, blind-scripted or external:URL.
    #[arg(long)]
    planner: Option<PlannerSpec>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Primitive success probability.
    #[arg(long)]
    success_prob: Option<f64>,
    /// Probability that a failed primitive drops the held object.
    #[arg(long)]
    drop_prob: Option<f64>,
    /// Disable scheduled perturbations and stale beliefs.
    #[arg(long)]
    no_perturbations: bool,
    /// Compare plans as multisets for Acc_P.
    #[arg(long)]
    multiset_plan_match: bool,
    /// Report format printed after the run.
    #[arg(long, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct ReplayArgs {
    /// Archive directory; replays every episode.
    #[arg(long, conflicts_with = "trace", required_unless_present = "trace")]
    archive: Option<PathBuf>,
    /// One episode file inside an archive's episodes/ directory.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Archive directory.
    #[arg(long, required_unless_present = "compare")]
    archive: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: Format,
    /// Print per-metric deltas B - A between two archives.
    #[arg(long, num_args = 2, value_names = ["A", "B"], conflicts_with = "archive")]
    compare: Option<Vec<PathBuf>>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Endpoint URL.
    #[arg(long)]
    url: String,
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
    /// Scene registry JSON used to parse the returned plan.
    #[arg(long)]
    registry: Option<PathBuf>,
}

type CmdResult = Result<ExitCode, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) | Command::Forge(ForgeCommand::Gen(a)) => gen(a),
        Command::Verify(a) | Command::Forge(ForgeCommand::Verify(a)) => verify(a),
        Command::Run(a) | Command::Bench(BenchCommand::Run(a)) => run(a),
        Command::Replay(a) | Command::Bench(BenchCommand::Replay(a)) => replay(a),
        Command::Report(a) | Command::Bench(BenchCommand::Report(a)) => report(a),
        Command::Probe(a) => probe_cmd(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

fn registry(path: Option<&Path>) -> Result<SceneRegistry, String> {
    match path {
        Some(p) => SceneRegistry::load(p).map_err(|e| e.to_string()),
        None => Ok(SceneRegistry::kitchen()),
    }
}

fn gen(a: GenArgs) -> CmdResult {
    let reg = registry(a.registry.as_deref())?;
    let counts: BTreeMap<Category, usize> = match a.category {
        Some(c) => [(c, a.count.unwrap_or(hsim_core::forge::DEFAULT_PER_CATEGORY))].into(),
        None => match a.count {
            Some(n) => Category::ALL.into_iter().map(|c| (c, n)).collect(),
            None => default_counts(),
        },
    };
    let tasks = emit_suite(&reg, &counts, a.seed).map_err(|e| e.to_string())?;
    write_suite(&a.out, &tasks, a.seed).map_err(|e| e.to_string())?;
    println!("wrote {} verified tasks to {}", tasks.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.task).map_err(|e| format!("{}: {e}", a.task.display()))?;
    let task = TaskSpec::from_json(&text).map_err(|e| e.to_string())?;
    let r = verify_task(&task);
    if r.passed {
        println!("{}: ok ({} steps, {} key transitions)", task.id, task.gt_plan.len(), task.key_transitions.len());
        return Ok(ExitCode::SUCCESS);
    }
    println!("{}: FAILED", task.id);
    for f in &r.step_failures {
        match f.requirement() {
            Some(req) => println!("  step {} `{}`: requires {req}", f.index, f.step),
            None => println!("  step {} `{}`: {:?}", f.index, f.step, f.fault),
        }
    }
    for s in &r.state_inconsistencies {
        println!("  {s}");
    }
    Ok(ExitCode::FAILURE)
}

/// Merges the config file (if any) with flag overrides.
fn resolve_run(a: &RunArgs) -> Result<(RunConfig, PathBuf, PathBuf), String> {
    let file = match &a.config {
        Some(p) => Some(HarnessConfig::load(p).map_err(|e| e.to_string())?),
        None => None,
    };
    let seed =
        a.seed.or(file.as_ref().and_then(|f| f.seed)).ok_or("--seed is required (or set `seed` in the config)")?;
    let suite = a.suite.clone().or(file.as_ref().map(|f| f.suite.clone())).ok_or("--suite or --config is required")?;
    let archive =
        a.archive.clone().or(file.as_ref().map(|f| f.archive.clone())).ok_or("--archive or --config is required")?;
    let mut cfg = match &file {
        Some(f) => f.run_config(seed),
        None => RunConfig::new(a.planner.clone().ok_or("--planner or --config is required")?, seed),
    };
    if let Some(p) = &a.planner {
        cfg.planner = p.clone();
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(n) = a.parallelism {
        cfg.parallelism = n;
    }
    cfg.noise = NoiseConfig {
        success_prob: a.success_prob.unwrap_or(cfg.noise.success_prob),
        drop_prob: a.drop_prob.unwrap_or(cfg.noise.drop_prob),
    };
    if a.no_perturbations {
        cfg.perturbations = false;
    }
    if a.multiset_plan_match {
        cfg.multiset_plan_match = true;
    }
    cfg.check()?;
    Ok((cfg, suite, archive))
}

fn run(a: RunArgs) -> CmdResult {
    let (cfg, suite, archive) = resolve_run(&a)?;
    let (_, tasks) = load_suite(&suite).map_err(|e| e.to_string())?;
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = cancel.clone();
    let _ = ctrlc::set_handler(move || {
        eprintln!("cancelling: finishing in-flight episodes");
        flag.store(true, Ordering::SeqCst);
    });
    let result = run_benchmark(&tasks, &cfg, Some(&cancel));
    let dir = write_archive(&archive, &cfg, &tasks, &result).map_err(|e| e.to_string())?;
    print!("{}", result.report.render(a.format));
    println!("archive: {}", dir.display());
    if result.partial {
        eprintln!("run cancelled: archive marked partial");
        return Ok(ExitCode::from(130));
    }
    if result.any_aborted() {
        eprintln!("{} episode(s) aborted", result.report.aborted.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(a: ReplayArgs) -> CmdResult {
    if let Some(trace) = a.trace {
        let dir = trace.parent().and_then(Path::parent).ok_or("trace must live in an archive's episodes/ directory")?;
        let archive = read_archive(dir).map_err(|e| e.to_string())?;
        return Ok(
            match replay_episode(&archive.manifest.config, &archive.tasks, &trace).map_err(|e| e.to_string())? {
                None => {
                    println!("{}: identical", trace.display());
                    ExitCode::SUCCESS
                }
                Some(d) => {
                    println!("{d}");
                    ExitCode::FAILURE
                }
            },
        );
    }
    let dir = a.archive.expect("clap enforces one of --archive/--trace");
    let r = replay_archive(&dir).map_err(|e| e.to_string())?;
    for d in &r.diffs {
        println!("{d}");
    }
    println!("replayed {} episodes: {} diffs", r.episodes, r.diffs.len());
    Ok(if r.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn load_report(dir: &Path) -> Result<MetricsReport, String> {
    let archive = read_archive(dir).map_err(|e| e.to_string())?;
    let cfg = &archive.manifest.config;
    Ok(MetricsReport::from_traces(&cfg.planner.to_string(), &archive.traces, cfg.multiset_plan_match))
}

fn report(a: ReportArgs) -> CmdResult {
    if let Some(pair) = a.compare {
        let (x, y) = (load_report(&pair[0])?, load_report(&pair[1])?);
        print!("{}", x.compare(&y));
        return Ok(ExitCode::SUCCESS);
    }
    let dir = a.archive.expect("clap enforces --archive without --compare");
    print!("{}", load_report(&dir)?.render(a.format));
    Ok(ExitCode::SUCCESS)
}

fn probe_cmd(a: ProbeArgs) -> CmdResult {
    let reg = registry(a.registry.as_deref())?;
    let cfg = ExternalConfig { url: a.url.clone(), timeout_ms: a.timeout_ms };
    match probe(&cfg, &reg) {
        Ok(plan) => {
            println!("health OK: {}", a.url);
            for (i, s) in plan.iter().enumerate() {
                println!("  {}. {}", i + 1, s.text);
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            println!("health FAILED: {e}");
            Ok(ExitCode::FAILURE)
        }
    }
}
