//! Reward computation over a finished trial, and aggregation across trials.

pub mod breakdown;
pub mod passk;
pub mod replay;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::env::{Domain, EnvError, Environment};
use crate::orchestrator::{Mode, StopReason, Trajectory};
use crate::tasks::{CompositeTask, EnvAssertion, ExpectedAction, Intent, Persona};
use crate::world::{Args, Event, PlayerId, WorldHashes};

pub use breakdown::{action_bin, breakdown_tables, BreakdownReport, ACTION_BINS};
pub use passk::{pass_hat_k, pass_hat_k_curve, PassKCurve};
pub use replay::{replay_trajectory, ReplayError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    DbCheck,
    EnvAssertion,
    ActionMatch,
    Communication,
    NlAssertion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub kind: CriterionKind,
    pub id: String,
    pub passed: bool,
    /// The criterion could not be evaluated; counts as failed.
    #[serde(default)]
    pub errored: bool,
    pub detail: String,
}

impl CriterionResult {
    fn new(kind: CriterionKind, id: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CriterionResult {
            kind,
            id: id.into(),
            passed,
            errored: false,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub task_id: String,
    pub trial_index: usize,
    pub mode: Mode,
    pub reward: u8,
    pub criteria: Vec<CriterionResult>,
    pub stop_reason: StopReason,
    pub step_count: usize,
    /// Some criterion errored (for example an unavailable judge).
    pub flagged: bool,
    pub intent: Intent,
    pub persona: Persona,
    pub n_actions: usize,
    pub n_subtasks: usize,
    pub requires_transfer: bool,
}

impl TrialRecord {
    pub fn success(&self) -> bool {
        self.reward == 1
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Judges a natural-language statement against a transcript.
pub trait Judge {
    fn id(&self) -> String;
    fn judge(&self, transcript: &str, statement: &str) -> Result<bool, String>;
}

/// Judge with a fixed verdict, for tests and dry runs.
#[derive(Debug, Clone, Copy)]
pub struct StubJudge(pub bool);

impl Judge for StubJudge {
    fn id(&self) -> String {
        format!("stub:{}", self.0)
    }

    fn judge(&self, _transcript: &str, _statement: &str) -> Result<bool, String> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Overrides each task's own action-matching switch.
    pub match_actions: Option<bool>,
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => x == y,
            _ => x == y,
        },
        _ => a == b,
    }
}

/// Same key set and equal values (numbers compared by value, so 2 == 2.0).
pub fn args_match(actual: &Args, expected: &Args) -> bool {
    actual.len() == expected.len()
        && expected
            .iter()
            .all(|(k, v)| actual.get(k).is_some_and(|a| values_equal(a, v)))
}

pub fn check_env_assertions<D: Domain>(
    env: &Environment<D>,
    assertions: &[EnvAssertion],
) -> Result<Vec<CriterionResult>, EvalError> {
    assertions
        .iter()
        .map(|a| {
            let got = env
                .evaluate_assertion(a.env, &a.function, &a.arguments)
                .map_err(|e| EvalError::Config(e.to_string()))?;
            Ok(CriterionResult::new(
                CriterionKind::EnvAssertion,
                a.id(),
                got == a.assert_value,
                format!("expected {}, got {got}", a.assert_value),
            ))
        })
        .collect()
}

/// Every expected call appears in the trajectory with the same actor, name
/// and arguments. Order and unrelated calls are ignored. In no_user mode
/// the agent performs the user-side calls, so requestors are remapped.
pub fn check_actions(events: &[Event], expected: &[ExpectedAction], mode: Mode) -> CriterionResult {
    let missing: Vec<&str> = expected
        .iter()
        .filter(|a| {
            let actor = if mode == Mode::NoUser { PlayerId::Agent } else { a.requestor };
            !events.iter().any(|e| {
                e.actor == actor
                    && e.tool_call()
                        .is_some_and(|c| c.name == a.name && args_match(&c.args, &a.arguments))
            })
        })
        .map(|a| a.action_id.as_str())
        .collect();
    let detail = if missing.is_empty() {
        format!("all {} expected actions found", expected.len())
    } else {
        format!("missing: {}", missing.join(", "))
    };
    CriterionResult::new(CriterionKind::ActionMatch, "actions", missing.is_empty(), detail)
}

pub fn check_db(actual: &WorldHashes, expected: Option<&WorldHashes>) -> Result<CriterionResult, EvalError> {
    let expected = expected.ok_or_else(|| EvalError::Config("db check configured without expected hashes".into()))?;
    let mut diffs = Vec::new();
    if actual.agent != expected.agent {
        diffs.push("agent_db");
    }
    if actual.user != expected.user {
        diffs.push("user_db");
    }
    let detail = if diffs.is_empty() {
        "both databases match".to_string()
    } else {
        format!("mismatch in {}", diffs.join(", "))
    };
    Ok(CriterionResult::new(CriterionKind::DbCheck, "db", diffs.is_empty(), detail))
}

/// Case-folded, commas and currency symbols removed, whitespace collapsed.
pub fn normalize_info(text: &str) -> String {
    let stripped: String = text
        .chars()
        .filter(|c| !matches!(c, ',' | '$' | '€' | '£' | '¥'))
        .flat_map(char::to_lowercase)
        .collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn check_communication(events: &[Event], required: &[String]) -> CriterionResult {
    let said = normalize_info(
        &events
            .iter()
            .filter(|e| e.actor == PlayerId::Agent)
            .filter_map(Event::message)
            .collect::<Vec<_>>()
            .join(" "),
    );
    let missing: Vec<&str> = required
        .iter()
        .filter(|r| !said.contains(&normalize_info(r)))
        .map(String::as_str)
        .collect();
    let detail = if missing.is_empty() {
        "all required info communicated".to_string()
    } else {
        format!("not communicated: {}", missing.join("; "))
    };
    CriterionResult::new(CriterionKind::Communication, "communication", missing.is_empty(), detail)
}

/// One line per event, tool payloads included.
pub fn render_transcript(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        if let Some(m) = e.message() {
            let _ = writeln!(out, "{}: {m}", e.actor);
        } else if let Some(c) = e.tool_call() {
            let result = e.observation.as_ref().map(|o| o.text()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{} called {}({}): {result}",
                e.actor,
                c.name,
                serde_json::to_string(&c.args).expect("args serialize")
            );
        }
    }
    out
}

pub fn check_nl_assertions(events: &[Event], statements: &[String], judge: Option<&dyn Judge>) -> Vec<CriterionResult> {
    let transcript = render_transcript(events);
    statements
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let id = format!("nl_{i}");
            match judge {
                None => CriterionResult {
                    errored: true,
                    ..CriterionResult::new(CriterionKind::NlAssertion, id, false, "no judge available")
                },
                Some(j) => match j.judge(&transcript, s) {
                    Ok(v) => CriterionResult::new(CriterionKind::NlAssertion, id, v, format!("judge {}: {s}", j.id())),
                    Err(e) => CriterionResult {
                        errored: true,
                        ..CriterionResult::new(CriterionKind::NlAssertion, id, false, format!("judge {} failed: {e}", j.id()))
                    },
                },
            }
        })
        .collect()
}

/// Evaluates the families the task configures; reward is their conjunction.
pub fn compute_reward<D: Domain>(
    task: &CompositeTask,
    trajectory: &Trajectory,
    final_env: &Environment<D>,
    judge: Option<&dyn Judge>,
    options: EvalOptions,
) -> Result<TrialRecord, EvalError> {
    let ev = &task.evaluation;
    let mut criteria = Vec::new();
    if let Some(expected) = &ev.db_hashes {
        criteria.push(check_db(&trajectory.final_world_hashes, Some(expected))?);
    }
    criteria.extend(check_env_assertions(final_env, &ev.env_assertions)?);
    if options.match_actions.unwrap_or(ev.match_actions) {
        criteria.push(check_actions(&trajectory.events, &ev.actions, trajectory.mode));
    }
    if !ev.communicate_info.is_empty() {
        criteria.push(check_communication(&trajectory.events, &ev.communicate_info));
    }
    criteria.extend(check_nl_assertions(&trajectory.events, &ev.nl_assertions, judge));
    Ok(record_from(task, trajectory, criteria))
}

pub fn record_from(task: &CompositeTask, trajectory: &Trajectory, criteria: Vec<CriterionResult>) -> TrialRecord {
    TrialRecord {
        task_id: task.id.clone(),
        trial_index: trajectory.trial_index,
        mode: trajectory.mode,
        reward: u8::from(criteria.iter().all(|c| c.passed && !c.errored)),
        flagged: criteria.iter().any(|c| c.errored),
        criteria,
        stop_reason: trajectory.stop_reason,
        step_count: trajectory.step_count(),
        intent: task.intent(),
        persona: task.persona(),
        n_actions: task.n_actions(),
        n_subtasks: task.n_subtasks(),
        requires_transfer: task.requires_transfer(),
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;
    use crate::world::{Action, EventBody, Observation, ToolCall};

    fn call(index: usize, actor: PlayerId, name: &str, args: Args) -> Event {
        Event {
            index,
            actor,
            body: EventBody::Act(Action::tool(ToolCall::with_args(name, args))),
            observation: Some(Observation::ok("")),
        }
    }

    fn say(index: usize, actor: PlayerId, text: &str) -> Event {
        Event {
            index,
            actor,
            body: EventBody::Act(Action::message(text)),
            observation: None,
        }
    }

    fn expected(id: &str, requestor: PlayerId, name: &str, args: Args) -> ExpectedAction {
        ExpectedAction {
            action_id: id.into(),
            requestor,
            name: name.into(),
            arguments: args,
        }
    }

    fn no_service_expected() -> Vec<ExpectedAction> {
        vec![
            expected("toggle_airplane_mode_0", PlayerId::User, "toggle_airplane_mode", Args::new()),
            expected("reseat_sim_card_1", PlayerId::User, "reseat_sim_card", Args::new()),
        ]
    }

    #[test]
    fn action_match_cases() {
        let both = vec![
            say(0, PlayerId::Agent, "hi"),
            call(1, PlayerId::User, "check_status_bar", Args::new()),
            call(2, PlayerId::User, "reseat_sim_card", Args::new()),
            call(3, PlayerId::User, "toggle_airplane_mode", Args::new()),
        ];
        assert!(check_actions(&both, &no_service_expected(), Mode::Default).passed);
        assert!(!check_actions(&both[..3], &no_service_expected(), Mode::Default).passed);
        let wrong_actor: Vec<Event> = both
            .iter()
            .cloned()
            .map(|mut e| {
                e.actor = PlayerId::Agent;
                e
            })
            .collect();
        assert!(!check_actions(&wrong_actor, &no_service_expected(), Mode::Default).passed);
        assert!(check_actions(&wrong_actor, &no_service_expected(), Mode::NoUser).passed);
    }

    #[test]
    fn action_args_are_exact_key_sets() {
        let exp = vec![expected("r", PlayerId::Agent, "refuel_data", [("gb".to_string(), json!(2.0))].into())];
        let same = [call(0, PlayerId::Agent, "refuel_data", [("gb".to_string(), json!(2))].into())];
        assert!(check_actions(&same, &exp, Mode::Default).passed);
        let extra = [call(
            0,
            PlayerId::Agent,
            "refuel_data",
            [("gb".to_string(), json!(2.0)), ("x".to_string(), json!(1))].into(),
        )];
        assert!(!check_actions(&extra, &exp, Mode::Default).passed);
    }

    #[test]
    fn communication_normalization() {
        let events = [say(0, PlayerId::Agent, "Your total is $150.00")];
        assert!(check_communication(&events, &["150.00".into()]).passed);
        let words = [say(0, PlayerId::Agent, "one hundred fifty")];
        assert!(!check_communication(&words, &["150.00".into()]).passed);
        assert!(check_communication(&words, &[]).passed);
        let by_user = [say(0, PlayerId::User, "150.00")];
        assert!(!check_communication(&by_user, &["150.00".into()]).passed);
        assert_eq!(normalize_info("  $1,500.00   TOTAL "), "1500.00 total");
    }

    #[test]
    fn nl_judges() {
        let s = vec!["the agent diagnosed the cause of the issue".to_string()];
        assert!(check_nl_assertions(&[], &s, Some(&StubJudge(true)))[0].passed);
        assert!(!check_nl_assertions(&[], &s, Some(&StubJudge(false)))[0].passed);
        let missing = &check_nl_assertions(&[], &s, None)[0];
        assert!(missing.errored && !missing.passed);
        assert!(check_nl_assertions(&[], &[], None).is_empty());
    }

    #[test]
    fn db_check() {
        let h = WorldHashes {
            agent: "a".into(),
            user: "u".into(),
        };
        assert!(check_db(&h, Some(&h)).unwrap().passed);
        let other = WorldHashes {
            user: "v".into(),
            ..h.clone()
        };
        assert!(!check_db(&other, Some(&h)).unwrap().passed);
        assert!(check_db(&h, None).is_err());
    }
}
