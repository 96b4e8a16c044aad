//! One function per subcommand. Each returns the JSON document printed on
//! success.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use duet_core::evaluation::{replay_trajectory, EvalOptions};
use duet_core::orchestrator::{run_suite, Mode, Policy, PolicyPair};
use duet_core::policies::{
    compliance_user, noisy_user, null_agent, oracle_agent, oracle_user, HttpTransport, LlmPolicy,
};
use duet_core::store::{
    evaluate_run, parse_trajectory_lenient, persist_run, read_trajectory, write_breakdown_csv, RunDir, RunManifest,
    Store,
};
use duet_core::tasks::io::{read_tasks, write_tasks};
use duet_core::tasks::{assign_personas, default_quotas, sample_balanced, verify_task, CompositeTask, Verdict};
use duet_core::telecom::catalog::catalog;
use duet_core::telecom::Telecom;

use crate::config::{AgentKind, Config, UserKind};
use crate::error::CliError;

pub fn domain(name: &str) -> Result<Arc<Telecom>, CliError> {
    match name {
        "telecom" => Ok(Telecom::shared()),
        other => Err(CliError::config(format!("unknown domain '{other}' (available: telecom)"))),
    }
}

/// Every composite task of the domain.
pub fn universe(domain_name: &str) -> Result<Vec<CompositeTask>, CliError> {
    domain(domain_name)?;
    Ok(catalog().compose(None)?)
}

/// The balanced suite with personas, drawn from the full universe.
pub fn balanced_suite(domain_name: &str, seed: u64) -> Result<Vec<CompositeTask>, CliError> {
    let mut tasks = sample_balanced(&universe(domain_name)?, &default_quotas(), seed)?;
    assign_personas(&mut tasks, seed);
    Ok(tasks)
}

fn tasks_or(path: Option<&Path>, fallback: impl FnOnce() -> Result<Vec<CompositeTask>, CliError>) -> Result<Vec<CompositeTask>, CliError> {
    match path {
        Some(p) => Ok(read_tasks(p)?),
        None => fallback(),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::write(p, text).map_err(|e| CliError::io(p, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn generate(config: &Config, out: &Path) -> Result<Value, CliError> {
    let tasks = universe(&config.domain)?;
    write_tasks(out, &tasks)?;
    Ok(json!({ "tasks": tasks.len(), "out": out }))
}

pub fn verify(config: &Config, tasks: Option<&Path>, out: Option<&Path>) -> Result<Value, CliError> {
    let domain = domain(&config.domain)?;
    let tasks = tasks_or(tasks, || universe(&config.domain))?;
    let reports = tasks
        .par_iter()
        .map(|t| verify_task(t, Arc::clone(&domain)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut lines = String::new();
    let mut failures = Vec::new();
    for (t, report) in tasks.iter().zip(reports) {
        if report.verdict != Verdict::Pass {
            failures.push(json!({ "task_id": t.id, "diagnostic": report.diagnostic }));
        }
        lines.push_str(&serde_json::to_string(&report).expect("report serializes"));
        lines.push('\n');
    }
    if let Some(p) = out {
        write_or_print(Some(p), &lines)?;
    }
    let summary = json!({
        "tasks": tasks.len(),
        "passed": tasks.len() - failures.len(),
        "failed": failures.len(),
    });
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(CliError::new("verification", format!("{} of {} tasks failed verification", failures.len(), tasks.len()))
            .with_details(json!({ "summary": summary, "failures": failures })))
    }
}

pub fn sample(config: &Config, tasks: Option<&Path>, seed: u64, out: &Path) -> Result<Value, CliError> {
    let pool = tasks_or(tasks, || universe(&config.domain))?;
    let mut picked = sample_balanced(&pool, &default_quotas(), seed)?;
    assign_personas(&mut picked, seed);
    write_tasks(out, &picked)?;
    let mut by_intent: BTreeMap<String, usize> = BTreeMap::new();
    for t in &picked {
        *by_intent.entry(t.intent().to_string()).or_default() += 1;
    }
    Ok(json!({ "tasks": picked.len(), "by_intent": by_intent, "seed": seed, "out": out }))
}

fn agent_policy(config: &Config, task: &CompositeTask) -> Box<dyn Policy> {
    match config.policies.agent {
        AgentKind::Oracle => Box::new(oracle_agent(task)),
        AgentKind::Null => Box::new(null_agent()),
        AgentKind::Llm => Box::new(LlmPolicy::new(
            config.llm.clone(),
            HttpTransport::new(&config.llm).expect("transport checked before the run"),
        )),
    }
}

fn user_policy(config: &Config, task: &CompositeTask, seed: u64) -> Box<dyn Policy> {
    match config.policies.user {
        UserKind::Oracle => Box::new(oracle_user(task)),
        UserKind::Compliance => Box::new(compliance_user(task)),
        UserKind::Noisy => Box::new(noisy_user(task, seed, config.policies.noise)),
        UserKind::Llm => Box::new(LlmPolicy::new(
            config.llm.clone(),
            HttpTransport::new(&config.llm).expect("transport checked before the run"),
        )),
    }
}

pub fn policy_pair(config: &Config, task: &CompositeTask, seed: u64) -> PolicyPair {
    PolicyPair {
        agent: agent_policy(config, task),
        user: (config.run.mode != Mode::NoUser).then(|| user_policy(config, task, seed)),
    }
}

fn uses_llm(config: &Config) -> bool {
    config.policies.agent == AgentKind::Llm || (config.run.mode != Mode::NoUser && config.policies.user == UserKind::Llm)
}

pub fn run(config: &Config, tasks: Option<&Path>, store_root: &Path) -> Result<Value, CliError> {
    let domain = domain(&config.domain)?;
    config.run.validate()?;
    if !(0.0..=1.0).contains(&config.policies.noise) {
        return Err(CliError::config("policies.noise must lie in [0, 1]"));
    }
    if uses_llm(config) {
        HttpTransport::new(&config.llm)?;
        if config.llm.model.is_empty() {
            return Err(CliError::config("llm.model is required for llm policies"));
        }
    }
    let tasks = tasks_or(tasks, || balanced_suite(&config.domain, config.sample.seed))?;
    let first = tasks.first().ok_or_else(|| CliError::config("no tasks to run"))?;
    let probe = policy_pair(config, first, 0);
    let mut policies = BTreeMap::new();
    policies.insert("agent".to_string(), probe.agent.id());
    if let Some(u) = &probe.user {
        policies.insert("user".to_string(), u.id());
    }

    let factory = |t: &CompositeTask, _trial: usize, seed: u64| policy_pair(config, t, seed);
    let results = run_suite(Arc::clone(&domain), &tasks, &factory, &config.run)?;

    let mut manifest = RunManifest::new(&config.run, &config.domain, &Telecom::fixture_digest(), policies, &tasks);
    if uses_llm(config) {
        manifest.llm = Some(serde_json::to_value(&config.llm).expect("llm config serializes"));
    }
    let store = Store::new(store_root);
    let run = persist_run(&store, &manifest, &tasks, &results)?;
    let (records, summary) = evaluate_run(domain, &run, None, EvalOptions::default())?;
    let mut stops: BTreeMap<String, usize> = BTreeMap::new();
    for r in &records {
        *stops.entry(r.stop_reason.to_string()).or_default() += 1;
    }
    Ok(json!({
        "run_id": manifest.run_id,
        "path": run.path,
        "mode": config.run.mode,
        "tasks": tasks.len(),
        "trajectories": records.len(),
        "mean_reward": summary.mean_reward,
        "pass_k": summary.pass_k.values,
        "stop_reasons": stops,
    }))
}

/// A run given either as a directory or as an id inside the store.
pub fn open_run(store_root: &Path, run: &str) -> Result<RunDir, CliError> {
    let as_path = PathBuf::from(run);
    if as_path.join("manifest.json").is_file() {
        return Ok(RunDir::open(as_path)?);
    }
    Ok(Store::new(store_root).open_run(run)?)
}

pub fn evaluate(store_root: &Path, run: &str, match_actions: Option<bool>) -> Result<Value, CliError> {
    let dir = open_run(store_root, run)?;
    let domain = domain(&dir.manifest.domain)?;
    let (_, summary) = evaluate_run(domain, &dir, None, EvalOptions { match_actions })?;
    Ok(serde_json::to_value(&summary).expect("summary serializes"))
}

pub fn replay(store_root: &Path, run: &str, trajectory: Option<&str>) -> Result<Value, CliError> {
    let dir = open_run(store_root, run)?;
    let domain = domain(&dir.manifest.domain)?;
    let tasks = dir.tasks()?;
    let files = match trajectory {
        Some(name) => vec![dir.trajectory_path(name)?],
        None => dir.trajectory_files()?,
    };
    let mut failures = Vec::new();
    for file in &files {
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let outcome = read_trajectory(file).map_err(CliError::from).and_then(|traj| {
            let task = tasks
                .iter()
                .find(|t| t.id == traj.task_id)
                .ok_or_else(|| CliError::new("replay", format!("unknown task '{}'", traj.task_id)))?;
            replay_trajectory(Arc::clone(&domain), task, &traj, &dir.manifest.config)?;
            Ok(())
        });
        if let Err(e) = outcome {
            failures.push(json!({ "file": name, "error": e }));
        }
    }
    if failures.is_empty() {
        Ok(json!({ "run_id": dir.manifest.run_id, "replayed": files.len(), "mismatches": 0 }))
    } else {
        Err(CliError::new(
            "replay",
            format!("{} of {} trajectories did not reproduce", failures.len(), files.len()),
        )
        .with_details(json!({ "failures": failures })))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportFormat {
    Csv,
    Json,
}

pub fn export(store_root: &Path, run: &str, format: ExportFormat, out: Option<&Path>) -> Result<Option<Value>, CliError> {
    let dir = open_run(store_root, run)?;
    let summary = dir.read_summary().map_err(|e| {
        CliError::new("store", format!("{e}; run `duet evaluate {run}` first"))
    })?;
    let text = match format {
        ExportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
            s.push('\n');
            s
        }
        ExportFormat::Csv => {
            let mut buf = Vec::new();
            write_breakdown_csv(&summary, &mut buf).map_err(|e| CliError::new("io", e.to_string()))?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
    };
    write_or_print(out, &text)?;
    Ok(out.map(|p| json!({ "run_id": summary.run_id, "out": p })))
}

#[derive(Debug, Clone, clap::Subcommand)]
pub enum InspectTarget {
    /// Manifests of all stored runs.
    Runs,
    /// Manifest, summary and trajectory files of one run.
    Run { run: String },
    /// One stored trajectory, decoded line by line.
    Trajectory { run: String, file: String },
    /// Ids and shape of the task list.
    Tasks,
    /// One task in full.
    Task { id: String },
}

pub fn inspect(config: &Config, store_root: &Path, tasks: Option<&Path>, target: &InspectTarget) -> Result<Value, CliError> {
    let store = Store::new(store_root);
    Ok(match target {
        InspectTarget::Runs => json!(store.list_runs()?),
        InspectTarget::Run { run } => {
            let dir = open_run(store_root, run)?;
            let files: Vec<String> = dir
                .trajectory_files()?
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect();
            json!({ "manifest": dir.manifest, "summary": dir.read_summary().ok(), "trajectories": files })
        }
        InspectTarget::Trajectory { run, file } => {
            let dir = open_run(store_root, run)?;
            let path = dir.trajectory_path(file)?;
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            json!(parse_trajectory_lenient(&text))
        }
        InspectTarget::Tasks => {
            let tasks = tasks_or(tasks, || balanced_suite(&config.domain, config.sample.seed))?;
            json!(tasks.iter().map(task_summary).collect::<Vec<_>>())
        }
        InspectTarget::Task { id } => {
            let tasks = tasks_or(tasks, || universe(&config.domain))?;
            let task = tasks
                .iter()
                .find(|t| &t.id == id)
                .ok_or_else(|| CliError::new("not_found", format!("unknown task '{id}'")))?;
            json!(task)
        }
    })
}

/// Compact listing entry for a task.
pub fn task_summary(t: &CompositeTask) -> Value {
    json!({
        "id": t.id,
        "intent": t.intent(),
        "persona": t.persona(),
        "n_subtasks": t.n_subtasks(),
        "n_actions": t.n_actions(),
        "requires_transfer": t.requires_transfer(),
    })
}
