//! Re-executes a stored trajectory and checks it reproduces itself.

use std::sync::Arc;

use thiserror::Error;

use crate::env::{Domain, Environment};
use crate::orchestrator::{RunConfig, SimError, Simulation, Trajectory};
use crate::tasks::CompositeTask;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("trajectory is for task '{found}', not '{expected}'")]
    WrongTask { expected: String, found: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("stop reason differs: recorded {recorded}, replayed {replayed}")]
    StopMismatch { recorded: String, replayed: String },
    #[error("final {db} hash mismatch: recorded {recorded}, replayed {replayed}")]
    HashMismatch {
        db: &'static str,
        recorded: String,
        replayed: String,
    },
}

/// Feeds every recorded decision back through a fresh simulation with the
/// run's configuration. Observations, stop reason and final hashes must
/// all match the recording.
pub fn replay_trajectory<D: Domain>(
    domain: Arc<D>,
    task: &CompositeTask,
    trajectory: &Trajectory,
    config: &RunConfig,
) -> Result<Environment<D>, ReplayError> {
    if task.id != trajectory.task_id {
        return Err(ReplayError::WrongTask {
            expected: task.id.clone(),
            found: trajectory.task_id.clone(),
        });
    }
    let config = RunConfig {
        mode: trajectory.mode,
        ..config.clone()
    };
    let sim = Simulation::resume(domain, task.clone(), config, trajectory.trial_index, &trajectory.events)?;
    let replayed = sim.stop_reason().map_or("none".to_string(), |s| s.to_string());
    if sim.stop_reason() != Some(trajectory.stop_reason) {
        return Err(ReplayError::StopMismatch {
            recorded: trajectory.stop_reason.to_string(),
            replayed,
        });
    }
    let (again, env) = sim.finish()?;
    for (db, recorded, replayed) in [
        ("agent", &trajectory.final_world_hashes.agent, &again.final_world_hashes.agent),
        ("user", &trajectory.final_world_hashes.user, &again.final_world_hashes.user),
    ] {
        if recorded != replayed {
            return Err(ReplayError::HashMismatch {
                db,
                recorded: recorded.clone(),
                replayed: replayed.clone(),
            });
        }
    }
    Ok(env)
}
