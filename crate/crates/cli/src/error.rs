use std::fmt;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

/// Failure of a command, printed to stderr as one JSON object.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    /// Extra structured detail, such as the failing tasks of `verify`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            details: None,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn record(&self) -> Value {
        json!({ "error": self })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

macro_rules! from_error {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new($kind, e.to_string())
            }
        })*
    };
}

from_error! {
    duet_core::store::StoreError => "store",
    duet_core::store::RunError => "evaluation",
    duet_core::tasks::TaskError => "task",
    duet_core::orchestrator::SimError => "simulation",
    duet_core::evaluation::EvalError => "evaluation",
    duet_core::evaluation::ReplayError => "replay",
    duet_core::policies::TransportError => "llm",
}
