//! Atomic subtasks, composite tasks and the task-file format.

pub mod compose;
pub mod io;
pub mod persona;
pub mod render;
pub mod sample;
pub mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::env::{EnvError, InitCall};
use crate::world::{Args, PlayerId, ToolCall, WorldHashes};

pub use compose::{compose_tasks, ComposeConstraints};
pub use persona::Persona;
pub use sample::{assign_personas, default_quotas, sample_balanced, Quotas};
pub use verify::{verify_task, Verdict, VerificationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    ServiceIssue,
    MobileDataIssue,
    MmsIssue,
}

impl Intent {
    pub const ALL: [Intent; 3] = [Intent::ServiceIssue, Intent::MobileDataIssue, Intent::MmsIssue];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::ServiceIssue => "service_issue",
            Intent::MobileDataIssue => "mobile_data_issue",
            Intent::MmsIssue => "mms_issue",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Intent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Intent::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| format!("unknown intent '{s}'"))
    }
}

/// A tool call some player must make to fix a defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCall {
    pub requestor: PlayerId,
    pub name: String,
    #[serde(default)]
    pub args: Args,
}

impl SolutionCall {
    pub fn new(requestor: PlayerId, name: &str) -> Self {
        SolutionCall {
            requestor,
            name: name.into(),
            args: Args::new(),
        }
    }

    pub fn arg(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.args.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionCall {
    pub env: PlayerId,
    pub function: String,
    #[serde(default)]
    pub args: Args,
    pub expected: bool,
}

impl AssertionCall {
    pub fn holds(env: PlayerId, function: &str, args: Args) -> Self {
        AssertionCall {
            env,
            function: function.into(),
            args,
            expected: true,
        }
    }
}

/// One defect: how to set it up, how to fix it, how to tell it is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicSubtask {
    pub id: String,
    pub intent: Intent,
    pub group_id: String,
    pub init_calls: Vec<InitCall>,
    pub solution_calls: Vec<SolutionCall>,
    pub assertion_calls: Vec<AssertionCall>,
    /// Extra sentence for the simulated user's task instructions.
    #[serde(default)]
    pub scenario_note: Option<String>,
    /// Extra sentence for the ticket.
    #[serde(default)]
    pub ticket_note: Option<String>,
}

/// Mutually exclusive alternatives; a composite picks at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskGroup {
    pub group_id: String,
    pub members: Vec<AtomicSubtask>,
}

/// Intent-level text shared by every composite of that intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub domain: String,
    pub purpose: String,
    pub reason_for_call: String,
    pub known_info: String,
    pub unknown_info: Option<String>,
    pub task_instructions: String,
    pub ticket: String,
    /// Setup calls run before any subtask's own init.
    pub preamble: Vec<InitCall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentSpec {
    pub intent: Intent,
    pub template: ScenarioTemplate,
    pub groups: Vec<SubtaskGroup>,
    pub min_subtasks: usize,
    pub max_subtasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub domain: String,
    pub intents: Vec<IntentSpec>,
}

impl Catalog {
    pub fn intent(&self, intent: Intent) -> Option<&IntentSpec> {
        self.intents.iter().find(|i| i.intent == intent)
    }

    /// Every composite of every (optionally filtered) intent within the
    /// intent's own subtask-count bounds.
    pub fn compose(&self, only: Option<Intent>) -> Result<Vec<CompositeTask>, TaskError> {
        let mut out = Vec::new();
        for spec in &self.intents {
            if only.is_some_and(|i| i != spec.intent) {
                continue;
            }
            let constraints = ComposeConstraints {
                min_subtasks: spec.min_subtasks,
                max_subtasks: Some(spec.max_subtasks),
                compatible: None,
            };
            out.extend(compose_tasks(spec, &constraints)?);
        }
        Ok(out)
    }
}

// ---- task-file format ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    #[serde(rename = "Purpose")]
    pub purpose: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instructions {
    #[serde(rename = "Domain")]
    pub domain: String,
    #[serde(rename = "Reason for call")]
    pub reason_for_call: String,
    #[serde(rename = "Known info")]
    pub known_info: String,
    #[serde(rename = "Unknown info")]
    pub unknown_info: Option<String>,
    #[serde(rename = "Task instructions")]
    pub task_instructions: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserScenario {
    #[serde(rename = "Persona")]
    pub persona: Option<String>,
    #[serde(rename = "Instructions")]
    pub instructions: Instructions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    #[serde(rename = "Initialization Data")]
    pub initialization_data: Option<Value>,
    #[serde(rename = "Initialization Actions")]
    pub initialization_actions: Vec<InitCall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedAction {
    #[serde(rename = "Action ID")]
    pub action_id: String,
    #[serde(rename = "Requestor")]
    pub requestor: PlayerId,
    #[serde(rename = "Name")]
    pub name: String,
    #[serde(rename = "Arguments", default)]
    pub arguments: Args,
}

impl ExpectedAction {
    pub fn to_call(&self) -> ToolCall {
        ToolCall::with_args(self.name.clone(), self.arguments.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvAssertion {
    #[serde(rename = "Env Type")]
    pub env: PlayerId,
    #[serde(rename = "Function")]
    pub function: String,
    #[serde(rename = "Arguments", default)]
    pub arguments: Args,
    #[serde(rename = "Assert Value")]
    pub assert_value: bool,
}

impl EnvAssertion {
    pub fn id(&self) -> String {
        if self.arguments.is_empty() {
            self.function.clone()
        } else {
            let args: Vec<String> = self
                .arguments
                .iter()
                .map(|(k, v)| match v {
                    Value::String(s) => format!("{k}={s}"),
                    other => format!("{k}={other}"),
                })
                .collect();
            format!("{}({})", self.function, args.join(", "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationCriteria {
    #[serde(rename = "Actions", default)]
    pub actions: Vec<ExpectedAction>,
    #[serde(rename = "Environment Assertions", default)]
    pub env_assertions: Vec<EnvAssertion>,
    #[serde(rename = "Communicate Info", default)]
    pub communicate_info: Vec<String>,
    #[serde(rename = "NL Assertions", default)]
    pub nl_assertions: Vec<String>,
    /// When set, the trajectory must contain every expected action.
    #[serde(rename = "Match Actions", default)]
    pub match_actions: bool,
    #[serde(rename = "DB Hashes", default)]
    pub db_hashes: Option<WorldHashes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetadata {
    pub intent: Intent,
    pub persona: Persona,
    pub subtasks: Vec<String>,
    pub groups: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeTask {
    #[serde(rename = "ID")]
    pub id: String,
    #[serde(rename = "Description")]
    pub description: Description,
    #[serde(rename = "User Scenario")]
    pub user_scenario: UserScenario,
    #[serde(rename = "Ticket")]
    pub ticket: String,
    #[serde(rename = "Initial State")]
    pub initial_state: InitialState,
    #[serde(rename = "Evaluation Criteria")]
    pub evaluation: EvaluationCriteria,
    #[serde(rename = "Metadata")]
    pub metadata: TaskMetadata,
}

pub const TRANSFER_TOOL: &str = "transfer_to_human";

impl CompositeTask {
    pub fn intent(&self) -> Intent {
        self.metadata.intent
    }

    pub fn persona(&self) -> Persona {
        self.metadata.persona
    }

    pub fn n_actions(&self) -> usize {
        self.evaluation.actions.len()
    }

    pub fn n_subtasks(&self) -> usize {
        self.metadata.subtasks.len()
    }

    pub fn init_actions(&self) -> &[InitCall] {
        &self.initial_state.initialization_actions
    }

    pub fn expected_actions(&self) -> &[ExpectedAction] {
        &self.evaluation.actions
    }

    pub fn requires_transfer(&self) -> bool {
        self.evaluation
            .actions
            .iter()
            .any(|a| a.name == TRANSFER_TOOL)
    }

    pub fn user_actions(&self) -> impl Iterator<Item = &ExpectedAction> {
        self.evaluation
            .actions
            .iter()
            .filter(|a| a.requestor == PlayerId::User)
    }
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("insufficient supply for cell ({intent}, {subtasks} subtasks): need {needed}, have {available}")]
    InsufficientSupply {
        intent: Intent,
        subtasks: usize,
        needed: usize,
        available: usize,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}
