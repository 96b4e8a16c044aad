//! Whole-run workflows shared by the CLI and the server.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::{RunDir, RunManifest, RunSummary, Store, StoreError};
use crate::env::{Domain, Environment};
use crate::evaluation::{
    breakdown_tables, compute_reward, pass_hat_k_curve, replay_trajectory, EvalError, EvalOptions, Judge,
    ReplayError, TrialRecord,
};
use crate::orchestrator::Trajectory;
use crate::tasks::CompositeTask;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{file}: {source}")]
    Replay { file: String, source: ReplayError },
    #[error("trajectory for unknown task '{0}'")]
    UnknownTask(String),
}

/// Creates the run directory and writes one file per trajectory.
pub fn persist_run<D: Domain>(
    store: &Store,
    manifest: &RunManifest,
    tasks: &[CompositeTask],
    results: &[(Trajectory, Environment<D>)],
) -> Result<RunDir, StoreError> {
    let index: BTreeMap<&str, usize> = tasks.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
    let run = store.create_run(manifest, tasks)?;
    for (traj, _) in results {
        let i = index
            .get(traj.task_id.as_str())
            .copied()
            .ok_or_else(|| StoreError::NotFound(traj.task_id.clone()))?;
        run.write_trajectory(i, traj)?;
    }
    Ok(run)
}

pub fn summarize(
    run_id: &str,
    manifest: &RunManifest,
    records: &[TrialRecord],
    tasks: &[CompositeTask],
) -> Result<RunSummary, EvalError> {
    let mean = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| f64::from(r.reward)).sum::<f64>() / records.len() as f64
    };
    Ok(RunSummary {
        run_id: run_id.into(),
        mode: manifest.mode,
        n_tasks: tasks.len(),
        n_records: records.len(),
        mean_reward: mean,
        pass_k: pass_hat_k_curve(records),
        breakdown: breakdown_tables(records, tasks)?,
    })
}

/// Re-executes every stored trajectory (which also checks its recorded
/// hashes), scores it, and writes results, summary and CSV into the run.
pub fn evaluate_run<D: Domain>(
    domain: Arc<D>,
    run: &RunDir,
    judge: Option<&dyn Judge>,
    options: EvalOptions,
) -> Result<(Vec<TrialRecord>, RunSummary), RunError> {
    let tasks = run.tasks()?;
    let by_id: BTreeMap<&str, &CompositeTask> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut records = Vec::new();
    for file in run.trajectory_files()? {
        let traj = super::read_trajectory(&file)?;
        let task = by_id
            .get(traj.task_id.as_str())
            .ok_or_else(|| RunError::UnknownTask(traj.task_id.clone()))?;
        let env = replay_trajectory(Arc::clone(&domain), task, &traj, &run.manifest.config).map_err(|source| {
            RunError::Replay {
                file: file.display().to_string(),
                source,
            }
        })?;
        records.push(compute_reward(task, &traj, &env, judge, options)?);
    }
    let summary = summarize(&run.manifest.run_id, &run.manifest, &records, &tasks)?;
    run.write_results(&records, &summary)?;
    Ok((records, summary))
}
