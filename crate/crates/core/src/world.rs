//! Shared state of a two-player conversation: the pair of databases, the
//! append-only event history, and the action/observation vocabulary both
//! players speak.
//!
//! Databases are arbitrary serde types. Equality of world states is decided
//! by [`state_hash`] over a canonical byte encoding, so stored digests stay
//! comparable across runs and platforms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Digest algorithm used by [`state_hash`]; recorded in run manifests.
pub const HASH_ALGORITHM: &str = "sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerId {
    Agent,
    User,
}

impl PlayerId {
    pub const ALL: [PlayerId; 2] = [PlayerId::Agent, PlayerId::User];

    pub fn other(self) -> PlayerId {
        match self {
            PlayerId::Agent => PlayerId::User,
            PlayerId::User => PlayerId::Agent,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PlayerId::Agent => "agent",
            PlayerId::User => "user",
        }
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlayerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "agent" => Ok(PlayerId::Agent),
            "user" => Ok(PlayerId::User),
            other => Err(format!("unknown player '{other}'")),
        }
    }
}

/// Named arguments of a call, kept in key order.
pub type Args = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    #[serde(default)]
    pub args: Args,
}

impl ToolCall {
    pub fn new(name: impl Into<String>) -> Self {
        ToolCall {
            name: name.into(),
            args: Args::new(),
        }
    }

    pub fn with_args(name: impl Into<String>, args: Args) -> Self {
        ToolCall {
            name: name.into(),
            args,
        }
    }

    pub fn arg(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.args.insert(key.into(), value.into());
        self
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, (k, v)) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// One move by a player: either a tool call or a natural-language message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    ToolCall(ToolCall),
    Message { text: String },
}

impl Action {
    pub fn message(text: impl Into<String>) -> Self {
        Action::Message { text: text.into() }
    }

    pub fn tool(call: ToolCall) -> Self {
        Action::ToolCall(call)
    }

    pub fn as_tool_call(&self) -> Option<&ToolCall> {
        match self {
            Action::ToolCall(call) => Some(call),
            Action::Message { .. } => None,
        }
    }

    pub fn as_message(&self) -> Option<&str> {
        match self {
            Action::Message { text } => Some(text),
            Action::ToolCall(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    ToolResult { payload: String, is_error: bool },
    IncomingMessage { from: PlayerId, text: String },
}

impl Observation {
    pub fn ok(payload: impl Into<String>) -> Self {
        Observation::ToolResult {
            payload: payload.into(),
            is_error: false,
        }
    }

    pub fn error(payload: impl Into<String>) -> Self {
        Observation::ToolResult {
            payload: payload.into(),
            is_error: true,
        }
    }

    pub fn is_error(&self) -> bool {
        matches!(self, Observation::ToolResult { is_error: true, .. })
    }

    /// Text a player would read for this observation.
    pub fn text(&self) -> &str {
        match self {
            Observation::ToolResult { payload, .. } => payload,
            Observation::IncomingMessage { text, .. } => text,
        }
    }
}

/// What an event records: a well-formed action, or a policy output the
/// harness could not interpret.
#[derive(Debug, Clone, PartialEq)]
pub enum EventBody {
    Act(Action),
    Rejected { raw: String, reason: String },
}

/// One entry of the interaction history. Ordered by `index` only; events
/// carry no wall-clock time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "WireEvent", try_from = "WireEvent")]
pub struct Event {
    pub index: usize,
    pub actor: PlayerId,
    pub body: EventBody,
    pub observation: Option<Observation>,
}

impl Event {
    pub fn action(&self) -> Option<&Action> {
        match &self.body {
            EventBody::Act(action) => Some(action),
            EventBody::Rejected { .. } => None,
        }
    }

    pub fn tool_call(&self) -> Option<&ToolCall> {
        self.action().and_then(Action::as_tool_call)
    }

    pub fn message(&self) -> Option<&str> {
        self.action().and_then(Action::as_message)
    }
}

/// Flat line-oriented encoding of an [`Event`]:
/// `{index, actor, kind, payload, observation}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireEvent {
    pub index: usize,
    pub actor: PlayerId,
    pub kind: String,
    pub payload: Value,
    pub observation: Option<Observation>,
}

impl From<Event> for WireEvent {
    fn from(event: Event) -> Self {
        let (kind, payload) = match event.body {
            EventBody::Act(Action::ToolCall(call)) => (
                "tool_call",
                serde_json::json!({ "name": call.name, "args": call.args }),
            ),
            EventBody::Act(Action::Message { text }) => {
                ("message", serde_json::json!({ "text": text }))
            }
            EventBody::Rejected { raw, reason } => (
                "rejected",
                serde_json::json!({ "raw": raw, "reason": reason }),
            ),
        };
        WireEvent {
            index: event.index,
            actor: event.actor,
            kind: kind.to_string(),
            payload,
            observation: event.observation,
        }
    }
}

impl TryFrom<WireEvent> for Event {
    type Error = String;

    fn try_from(wire: WireEvent) -> Result<Self, Self::Error> {
        let field = |name: &str| -> Result<String, String> {
            wire.payload
                .get(name)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| format!("event {}: payload missing '{name}'", wire.index))
        };
        let body = match wire.kind.as_str() {
            "tool_call" => {
                let name = field("name")?;
                let args = match wire.payload.get("args") {
                    None | Some(Value::Null) => Args::new(),
                    Some(v) => serde_json::from_value(v.clone())
                        .map_err(|e| format!("event {}: bad args: {e}", wire.index))?,
                };
                EventBody::Act(Action::ToolCall(ToolCall { name, args }))
            }
            "message" => EventBody::Act(Action::Message {
                text: field("text")?,
            }),
            "rejected" => EventBody::Rejected {
                raw: field("raw")?,
                reason: field("reason")?,
            },
            other => return Err(format!("event {}: unknown kind '{other}'", wire.index)),
        };
        Ok(Event {
            index: wire.index,
            actor: wire.actor,
            body,
            observation: wire.observation,
        })
    }
}

/// Marker for database types. Any cloneable serde type qualifies.
pub trait Database:
    Clone + fmt::Debug + Serialize + DeserializeOwned + Send + Sync + 'static
{
}

impl<T> Database for T where
    T: Clone + fmt::Debug + Serialize + DeserializeOwned + Send + Sync + 'static
{
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState<A, U> {
    pub agent_db: A,
    pub user_db: U,
}

impl<A: Serialize, U: Serialize> WorldState<A, U> {
    pub fn hashes(&self) -> Result<WorldHashes, EncodingError> {
        Ok(WorldHashes {
            agent: state_hash(&self.agent_db)?,
            user: state_hash(&self.user_db)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldHashes {
    pub agent: String,
    pub user: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("event index {got} does not follow history of length {expected}")]
pub struct ContractViolation {
    pub expected: usize,
    pub got: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalState<A, U> {
    pub world: WorldState<A, U>,
    pub history: Vec<Event>,
}

impl<A, U> GlobalState<A, U> {
    pub fn new(world: WorldState<A, U>) -> Self {
        GlobalState {
            world,
            history: Vec::new(),
        }
    }

    /// Appends `event`; its index must equal the current history length.
    pub fn append_event(&mut self, event: Event) -> Result<(), ContractViolation> {
        if event.index != self.history.len() {
            return Err(ContractViolation {
                expected: self.history.len(),
                got: event.index,
            });
        }
        self.history.push(event);
        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("cannot encode database: {0}")]
pub struct EncodingError(String);

/// Canonical byte encoding of a database: sorted object keys, explicit
/// nulls, numbers without trailing zeros, no insignificant whitespace.
pub fn canonical_serialize<T: Serialize + ?Sized>(db: &T) -> Result<Vec<u8>, EncodingError> {
    let value = serde_json::to_value(db).map_err(|e| EncodingError(e.to_string()))?;
    let mut out = Vec::new();
    write_canonical(&value, &mut out)?;
    Ok(out)
}

fn write_canonical(value: &Value, out: &mut Vec<u8>) -> Result<(), EncodingError> {
    match value {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(b) => out.extend_from_slice(if *b { b"true" } else { b"false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.extend_from_slice(i.to_string().as_bytes());
            } else if let Some(u) = n.as_u64() {
                out.extend_from_slice(u.to_string().as_bytes());
            } else {
                let f = n
                    .as_f64()
                    .ok_or_else(|| EncodingError(format!("unrepresentable number {n}")))?;
                if !f.is_finite() {
                    return Err(EncodingError(format!("non-finite number {f}")));
                }
                // `{}` on f64 is the shortest round-trip form: 25.0 -> "25", 8.70 -> "8.7".
                let f = if f == 0.0 { 0.0 } else { f };
                out.extend_from_slice(format!("{f}").as_bytes());
            }
        }
        Value::String(s) => write_string(s, out)?,
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push(b'{');
            for (i, (k, v)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(k, out)?;
                out.push(b':');
                write_canonical(v, out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_string(s: &str, out: &mut Vec<u8>) -> Result<(), EncodingError> {
    let quoted = serde_json::to_string(s).map_err(|e| EncodingError(e.to_string()))?;
    out.extend_from_slice(quoted.as_bytes());
    Ok(())
}

/// Lowercase hex SHA-256 of the canonical encoding.
pub fn state_hash<T: Serialize + ?Sized>(db: &T) -> Result<String, EncodingError> {
    let bytes = canonical_serialize(db)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
