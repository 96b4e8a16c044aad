//! Checks that a composite is unsolved until its last solution call lands.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CompositeTask, TaskError};
use crate::env::{Domain, Environment};
use crate::world::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub task_id: String,
    pub unsolved_after_init: bool,
    /// Solved flag after each non-empty strict prefix of the solution.
    pub prefix_results: Vec<bool>,
    pub solved_after_all: bool,
    pub verdict: Verdict,
    pub diagnostic: Option<String>,
}

/// All of the task's assertions hold in `env`.
pub fn task_solved<D: Domain>(task: &CompositeTask, env: &Environment<D>) -> Result<bool, TaskError> {
    for a in &task.evaluation.env_assertions {
        if env.evaluate_assertion(a.env, &a.function, &a.arguments)? != a.assert_value {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs init, then the expected actions one at a time, checking the
/// assertions before the first action and after each one. Configuration
/// errors (unknown init or assertion functions) are returned as `Err`; a
/// failing solution call yields a failing report.
pub fn verify_task<D: Domain>(task: &CompositeTask, domain: Arc<D>) -> Result<VerificationReport, TaskError> {
    let mut env = Environment::new(domain);
    env.apply_init(task.init_actions())?;
    let unsolved_after_init = !task_solved(task, &env)?;

    let actions = task.expected_actions();
    let mut prefix_results = Vec::new();
    let mut solved_after_all = false;
    let mut diagnostic = None;
    for (i, expected) in actions.iter().enumerate() {
        let obs = env.step(expected.requestor, Action::tool(expected.to_call()));
        if obs.is_error() {
            diagnostic = Some(format!(
                "solution call {} ({}) failed: {}",
                i,
                expected.name,
                obs.text()
            ));
            break;
        }
        let solved = task_solved(task, &env)?;
        if i + 1 < actions.len() {
            prefix_results.push(solved);
        } else {
            solved_after_all = solved;
        }
    }
    if actions.is_empty() {
        solved_after_all = !unsolved_after_init;
    }

    let pass = diagnostic.is_none()
        && unsolved_after_init
        && prefix_results.iter().all(|s| !s)
        && solved_after_all;
    if diagnostic.is_none() && !pass {
        diagnostic = Some(if !unsolved_after_init {
            "already solved after init".into()
        } else if let Some(k) = prefix_results.iter().position(|&s| s) {
            format!("solved after only {} of {} actions", k + 1, actions.len())
        } else {
            "not solved after all actions".into()
        });
    }
    Ok(VerificationReport {
        task_id: task.id.clone(),
        unsolved_after_init,
        prefix_results,
        solved_after_all,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
        diagnostic,
    })
}
