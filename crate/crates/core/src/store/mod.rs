//! On-disk run store: one directory per run.
//!
//! ```text
//! <root>/runs/<run_id>/manifest.json
//! <root>/runs/<run_id>/tasks.json
//! <root>/runs/<run_id>/trajectories/<task#>_t<trial>.jsonl
//! <root>/runs/<run_id>/results.jsonl | summary.json | results.csv
//! <root>/sessions/<session_id>.json
//! ```
//!
//! A trajectory file is one header line followed by one event per line.

mod run;
pub mod session;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{BreakdownReport, PassKCurve, TrialRecord};
use crate::orchestrator::{Mode, RunConfig, StopReason, Trajectory};
use crate::tasks::io::{read_tasks, write_tasks};
use crate::tasks::CompositeTask;
use crate::world::{state_hash, Event, WorldHashes};

pub use run::{evaluate_run, persist_run, summarize, RunError};
pub use session::{InterventionRecord, SessionError, SessionInfo, SessionManager, SessionState, StepOutcome};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
pub const CSV_COLUMNS: [&str; 8] = [
    "task_id",
    "trial",
    "reward",
    "stop_reason",
    "intent",
    "persona",
    "n_actions",
    "n_subtasks",
];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{0} already exists")]
    Exists(String),
    #[error("not found: {0}")]
    NotFound(String),
}

fn io_err(path: &Path, e: impl ToString) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn parse_err(path: &Path, line: usize, e: impl ToString) -> StoreError {
    StoreError::Parse {
        path: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line(), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub timestamp: String,
    pub mode: Mode,
    pub config: RunConfig,
    pub domain: String,
    pub fixture_digest: String,
    /// Policy identifiers by role.
    pub policies: BTreeMap<String, String>,
    pub code_version: String,
    pub task_count: usize,
    pub tasks_digest: String,
    /// Adapter settings (model, temperature, ...) when an LLM policy is used.
    #[serde(default)]
    pub llm: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(
        config: &RunConfig,
        domain: &str,
        fixture_digest: &str,
        policies: BTreeMap<String, String>,
        tasks: &[CompositeTask],
    ) -> Self {
        let now = chrono::Utc::now();
        RunManifest {
            run_id: format!("{}-{}-s{}", now.format("%Y%m%dT%H%M%S%3fZ"), config.mode, config.seed),
            timestamp: now.to_rfc3339(),
            mode: config.mode,
            config: config.clone(),
            domain: domain.into(),
            fixture_digest: fixture_digest.into(),
            policies,
            code_version: CODE_VERSION.into(),
            task_count: tasks.len(),
            tasks_digest: state_hash(tasks).expect("tasks encode"),
            llm: None,
        }
    }
}

/// First line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    /// Manifest this file belongs to, relative to the file.
    pub manifest: String,
    pub task_id: String,
    pub trial_index: usize,
    pub mode: Mode,
    pub seed: u64,
    pub stop_reason: StopReason,
    pub initial_world_hashes: WorldHashes,
    pub final_world_hashes: WorldHashes,
    pub event_count: usize,
}

const MANIFEST_REF: &str = "../manifest.json";

pub fn trajectory_to_jsonl(t: &Trajectory) -> String {
    let header = TrajectoryHeader {
        manifest: MANIFEST_REF.into(),
        task_id: t.task_id.clone(),
        trial_index: t.trial_index,
        mode: t.mode,
        seed: t.seed,
        stop_reason: t.stop_reason,
        initial_world_hashes: t.initial_world_hashes.clone(),
        final_world_hashes: t.final_world_hashes.clone(),
        event_count: t.events.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for e in &t.events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_trajectory(text: &str, path: &Path) -> Result<Trajectory, StoreError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| parse_err(path, 1, "empty trajectory file"))?;
    let header: TrajectoryHeader = serde_json::from_str(first).map_err(|e| parse_err(path, 1, e))?;
    let events = lines
        .map(|(i, l)| serde_json::from_str::<Event>(l).map_err(|e| parse_err(path, i + 1, e)))
        .collect::<Result<Vec<_>, _>>()?;
    if events.len() != header.event_count {
        return Err(parse_err(
            path,
            events.len() + 1,
            format!("header announces {} events, found {}", header.event_count, events.len()),
        ));
    }
    for (i, e) in events.iter().enumerate() {
        if e.index != i {
            return Err(parse_err(path, i + 2, format!("event index {} out of sequence", e.index)));
        }
    }
    Ok(Trajectory {
        task_id: header.task_id,
        trial_index: header.trial_index,
        mode: header.mode,
        seed: header.seed,
        events,
        stop_reason: header.stop_reason,
        initial_world_hashes: header.initial_world_hashes,
        final_world_hashes: header.final_world_hashes,
    })
}

/// A line of a trajectory file that could not be decoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

/// Best-effort reading for display: undecodable lines are reported and
/// skipped instead of failing the whole file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub header: Option<TrajectoryHeader>,
    pub events: Vec<Event>,
    pub errors: Vec<LineError>,
}

pub fn parse_trajectory_lenient(text: &str) -> TrajectoryDocument {
    let mut doc = TrajectoryDocument {
        header: None,
        events: Vec::new(),
        errors: Vec::new(),
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        None => doc.errors.push(LineError {
            line: 1,
            message: "empty trajectory file".into(),
        }),
        Some((i, first)) => match serde_json::from_str::<TrajectoryHeader>(first) {
            Ok(h) => doc.header = Some(h),
            Err(e) => doc.errors.push(LineError {
                line: i + 1,
                message: format!("header: {e}"),
            }),
        },
    }
    for (i, l) in lines {
        match serde_json::from_str::<Event>(l) {
            Ok(e) => doc.events.push(e),
            Err(e) => doc.errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    doc
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_trajectory(&text, path)
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<(), StoreError> {
    fs::write(path, trajectory_to_jsonl(t)).map_err(|e| io_err(path, e))
}

pub fn write_results_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.task_id.clone(),
            r.trial_index.to_string(),
            r.reward.to_string(),
            r.stop_reason.to_string(),
            r.intent.to_string(),
            r.persona.as_str().to_string(),
            r.n_actions.to_string(),
            r.n_subtasks.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const EXPORT_COLUMNS: [&str; 7] = ["dimension", "mode", "bin", "n_tasks", "proportion", "k", "pass_k"];

/// Long-format pass^k table: one row per (table, bin, k). The overall
/// curve appears as dimension `overall`, mode `all`.
pub fn write_breakdown_csv<W: Write>(summary: &RunSummary, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPORT_COLUMNS)?;
    let n = summary.pass_k.per_task.len().to_string();
    for (i, v) in summary.pass_k.values.iter().enumerate() {
        w.write_record(["overall", "all", "all", &n, "1", &(i + 1).to_string(), &v.to_string()])?;
    }
    let tables = std::iter::once(&summary.breakdown.by_mode).chain(&summary.breakdown.tables);
    for table in tables {
        let mode = table.mode.map_or("all".to_string(), |m| m.to_string());
        for row in &table.rows {
            for (i, v) in row.pass_k.iter().enumerate() {
                w.write_record([
                    table.dimension.as_str(),
                    mode.as_str(),
                    row.bin.as_str(),
                    &row.n_tasks.to_string(),
                    &row.proportion.to_string(),
                    &(i + 1).to_string(),
                    &v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub mode: Mode,
    pub n_tasks: usize,
    pub n_records: usize,
    pub mean_reward: f64,
    pub pass_k: PassKCurve,
    pub breakdown: BreakdownReport,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.root.join("sessions")
    }

    /// Creates the run directory and writes its manifest and task list.
    /// Fails if a run with the same id exists.
    pub fn create_run(&self, manifest: &RunManifest, tasks: &[CompositeTask]) -> Result<RunDir, StoreError> {
        let runs = self.runs_dir();
        fs::create_dir_all(&runs).map_err(|e| io_err(&runs, e))?;
        let dir = runs.join(&manifest.run_id);
        match fs::create_dir(&dir) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(StoreError::Exists(dir.display().to_string()))
            }
            Err(e) => return Err(io_err(&dir, e)),
        }
        let traj = dir.join("trajectories");
        fs::create_dir(&traj).map_err(|e| io_err(&traj, e))?;
        let path = dir.join("manifest.json");
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        text.push('\n');
        file.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))?;
        let tasks_path = dir.join("tasks.json");
        write_tasks(&tasks_path, tasks).map_err(|e| io_err(&tasks_path, e))?;
        Ok(RunDir {
            path: dir,
            manifest: manifest.clone(),
        })
    }

    pub fn open_run(&self, run_id: &str) -> Result<RunDir, StoreError> {
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id.starts_with('.') {
            return Err(StoreError::NotFound(run_id.into()));
        }
        RunDir::open(self.runs_dir().join(run_id))
    }

    /// Manifests of all runs, sorted by run id.
    pub fn list_runs(&self) -> Result<Vec<RunManifest>, StoreError> {
        let runs = self.runs_dir();
        if !runs.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&runs).map_err(|e| io_err(&runs, e))? {
            let entry = entry.map_err(|e| io_err(&runs, e))?;
            let manifest = entry.path().join("manifest.json");
            if manifest.is_file() {
                out.push(read_json::<RunManifest>(&manifest)?);
            }
        }
        out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
    pub manifest: RunManifest,
}

impl RunDir {
    pub fn open(path: PathBuf) -> Result<Self, StoreError> {
        let manifest_path = path.join("manifest.json");
        if !manifest_path.is_file() {
            return Err(StoreError::NotFound(path.display().to_string()));
        }
        let manifest = read_json(&manifest_path)?;
        Ok(RunDir { path, manifest })
    }

    pub fn trajectory_name(task_index: usize, trial: usize) -> String {
        format!("{task_index:04}_t{trial}.jsonl")
    }

    /// Writes one trajectory; an existing file is never overwritten.
    pub fn write_trajectory(&self, task_index: usize, t: &Trajectory) -> Result<PathBuf, StoreError> {
        let path = self
            .path
            .join("trajectories")
            .join(Self::trajectory_name(task_index, t.trial_index));
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| io_err(&path, e))?;
        file.write_all(trajectory_to_jsonl(t).as_bytes())
            .map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn trajectory_files(&self) -> Result<Vec<PathBuf>, StoreError> {
        let dir = self.path.join("trajectories");
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        Ok(files)
    }

    pub fn trajectory_path(&self, name: &str) -> Result<PathBuf, StoreError> {
        if name.contains(['/', '\\']) || !name.ends_with(".jsonl") {
            return Err(StoreError::NotFound(name.into()));
        }
        let path = self.path.join("trajectories").join(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(StoreError::NotFound(name.into()))
        }
    }

    pub fn load_trajectories(&self) -> Result<Vec<Trajectory>, StoreError> {
        self.trajectory_files()?.iter().map(|p| read_trajectory(p)).collect()
    }

    pub fn tasks(&self) -> Result<Vec<CompositeTask>, StoreError> {
        let path = self.path.join("tasks.json");
        read_tasks(&path).map_err(|e| io_err(&path, e))
    }

    pub fn write_results(&self, records: &[TrialRecord], summary: &RunSummary) -> Result<(), StoreError> {
        let path = self.path.join("results.jsonl");
        let mut text = String::new();
        for r in records {
            text.push_str(&serde_json::to_string(r).expect("record serializes"));
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        write_json(&self.path.join("summary.json"), summary)?;
        let csv_path = self.path.join("results.csv");
        let file = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
        write_results_csv(records, file).map_err(|e| io_err(&csv_path, e))
    }

    pub fn read_results(&self) -> Result<Vec<TrialRecord>, StoreError> {
        let path = self.path.join("results.jsonl");
        let file = File::open(&path).map_err(|e| io_err(&path, e))?;
        BufReader::new(file)
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|(i, l)| {
                let l = l.map_err(|e| io_err(&path, e))?;
                serde_json::from_str(&l).map_err(|e| parse_err(&path, i + 1, e))
            })
            .collect()
    }

    pub fn read_summary(&self) -> Result<RunSummary, StoreError> {
        read_json(&self.path.join("summary.json"))
    }
}
