//! Tool registries and the transition function over a shared world.
//!
//! A [`Domain`] supplies the two database types, a seed world, the tools
//! each player owns, and the privileged initialization and assertion
//! functions that tasks reference by name. [`Environment`] executes one
//! player's action at a time against that world.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::world::{
    Action, Args, Database, EncodingError, Event, EventBody, GlobalState, Observation, PlayerId,
    ToolCall, WorldHashes, WorldState,
};

pub type World<D> = WorldState<<D as Domain>::AgentDb, <D as Domain>::UserDb>;
pub type State<D> = GlobalState<<D as Domain>::AgentDb, <D as Domain>::UserDb>;

/// Privileged setup function: mutates the world, may touch either database.
pub type InitFn<D> = fn(&mut World<D>, &Args) -> Result<(), String>;

/// Pure predicate over the full state. `Err` is a configuration problem
/// (for example an unknown expected value), not a failed check.
pub type AssertionFn<D> = fn(&State<D>, &Args) -> Result<bool, String>;

pub trait Domain: Send + Sync + Sized + 'static {
    type AgentDb: Database;
    type UserDb: Database;

    fn name(&self) -> &str;
    fn seed_world(&self) -> World<Self>;
    fn tools(&self) -> &ToolRegistry<Self>;
    fn init_function(&self, env: PlayerId, name: &str) -> Option<InitFn<Self>>;
    fn assertion(&self, env: PlayerId, name: &str) -> Option<AssertionFn<Self>>;

    /// Domain policy text placed in the agent's instructions.
    fn agent_policy(&self) -> String {
        String::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamType {
    String,
    Number,
    /// Number strictly greater than zero.
    PositiveNumber,
    Integer,
    Boolean,
    Enum { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub description: String,
}

impl ParamSpec {
    pub fn required(name: &str, ty: ParamType, description: &str) -> Self {
        ParamSpec {
            name: name.to_string(),
            ty,
            required: true,
            description: description.to_string(),
        }
    }

    pub fn optional(name: &str, ty: ParamType, description: &str) -> Self {
        ParamSpec {
            required: false,
            ..ParamSpec::required(name, ty, description)
        }
    }

    fn json_schema(&self) -> Value {
        let mut schema = match &self.ty {
            ParamType::String => json!({ "type": "string" }),
            ParamType::Number => json!({ "type": "number" }),
            ParamType::PositiveNumber => json!({ "type": "number", "exclusiveMinimum": 0 }),
            ParamType::Integer => json!({ "type": "integer" }),
            ParamType::Boolean => json!({ "type": "boolean" }),
            ParamType::Enum { values } => json!({ "type": "string", "enum": values }),
        };
        schema["description"] = Value::String(self.description.clone());
        schema
    }

    fn check(&self, value: &Value) -> Result<(), String> {
        let ok = match &self.ty {
            ParamType::String => value.as_str().is_some_and(|s| !s.trim().is_empty()),
            ParamType::Number => value.is_number(),
            ParamType::PositiveNumber => value.as_f64().is_some_and(|x| x > 0.0 && x.is_finite()),
            ParamType::Integer => value.is_i64() || value.is_u64(),
            ParamType::Boolean => value.is_boolean(),
            ParamType::Enum { values } => value
                .as_str()
                .is_some_and(|s| values.iter().any(|v| v == s)),
        };
        if ok {
            Ok(())
        } else {
            let expected = match &self.ty {
                ParamType::String => "a non-empty string".to_string(),
                ParamType::Number => "a number".to_string(),
                ParamType::PositiveNumber => "a number greater than 0".to_string(),
                ParamType::Integer => "an integer".to_string(),
                ParamType::Boolean => "a boolean".to_string(),
                ParamType::Enum { values } => format!("one of {}", values.join(", ")),
            };
            Err(format!("'{}' must be {expected}, got {value}", self.name))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub owner: PlayerId,
    pub kind: ToolKind,
    pub params: Vec<ParamSpec>,
    pub doc: String,
}

impl ToolSpec {
    /// Structural validation: no unknown keys, required keys present,
    /// primitive types respected.
    pub fn validate(&self, args: &Args) -> Result<(), String> {
        for key in args.keys() {
            if !self.params.iter().any(|p| &p.name == key) {
                return Err(format!("unexpected argument '{key}'"));
            }
        }
        for param in &self.params {
            match args.get(&param.name) {
                Some(Value::Null) | None if param.required => {
                    return Err(format!("missing required argument '{}'", param.name))
                }
                Some(Value::Null) | None => {}
                Some(value) => param.check(value)?,
            }
        }
        Ok(())
    }

    /// Chat-completion tool declaration (`{"type":"function","function":{...}}`).
    pub fn to_chat_tool(&self) -> Value {
        let properties: serde_json::Map<String, Value> = self
            .params
            .iter()
            .map(|p| (p.name.clone(), p.json_schema()))
            .collect();
        let required: Vec<&str> = self
            .params
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.as_str())
            .collect();
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.doc,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                    "additionalProperties": false,
                }
            }
        })
    }
}

/// Read tools receive the world immutably, so they cannot mutate it.
pub enum ToolImpl<D: Domain> {
    Read(fn(&World<D>, &Args) -> Result<String, String>),
    Write(fn(&mut World<D>, &Args) -> Result<String, String>),
}

impl<D: Domain> Clone for ToolImpl<D> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<D: Domain> Copy for ToolImpl<D> {}

pub struct Tool<D: Domain> {
    pub spec: ToolSpec,
    pub imp: ToolImpl<D>,
}

pub struct ToolRegistry<D: Domain> {
    tools: Vec<Tool<D>>,
}

impl<D: Domain> Default for ToolRegistry<D> {
    fn default() -> Self {
        ToolRegistry { tools: Vec::new() }
    }
}

impl<D: Domain> fmt::Debug for ToolRegistry<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.tools.iter().map(|t| &t.spec.name))
            .finish()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("tool '{0}' is already registered for {1}")]
    Duplicate(String, PlayerId),
    #[error("tool '{name}' is declared {declared:?} but implemented as {implemented:?}")]
    KindMismatch {
        name: String,
        declared: ToolKind,
        implemented: ToolKind,
    },
}

impl<D: Domain> ToolRegistry<D> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, spec: ToolSpec, imp: ToolImpl<D>) -> Result<(), RegistryError> {
        let implemented = match imp {
            ToolImpl::Read(_) => ToolKind::Read,
            ToolImpl::Write(_) => ToolKind::Write,
        };
        if implemented != spec.kind {
            return Err(RegistryError::KindMismatch {
                name: spec.name,
                declared: spec.kind,
                implemented,
            });
        }
        if self
            .tools
            .iter()
            .any(|t| t.spec.owner == spec.owner && t.spec.name == spec.name)
        {
            return Err(RegistryError::Duplicate(spec.name, spec.owner));
        }
        self.tools.push(Tool { spec, imp });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tool<D>> {
        self.tools.iter().find(|t| t.spec.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tool<D>> {
        self.tools.iter()
    }

    pub fn specs_for(&self, owner: PlayerId) -> Vec<ToolSpec> {
        self.tools
            .iter()
            .filter(|t| t.spec.owner == owner)
            .map(|t| t.spec.clone())
            .collect()
    }

    pub fn count(&self, owner: PlayerId, kind: ToolKind) -> usize {
        self.tools
            .iter()
            .filter(|t| t.spec.owner == owner && t.spec.kind == kind)
            .count()
    }
}

/// A privileged setup call from a task's initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitCall {
    #[serde(rename = "Action")]
    pub name: String,
    #[serde(rename = "Env Type")]
    pub env: PlayerId,
    #[serde(rename = "Arguments", default)]
    pub args: Args,
}

impl InitCall {
    pub fn new(env: PlayerId, name: &str) -> Self {
        InitCall {
            name: name.to_string(),
            env,
            args: Args::new(),
        }
    }

    pub fn arg(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.args.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("unknown init function '{name}' for {env} environment")]
    UnknownInit { env: PlayerId, name: String },
    #[error("init function '{name}' failed: {message}")]
    InitFailed { name: String, message: String },
    #[error("unknown assertion '{name}' for {env} environment")]
    UnknownAssertion { env: PlayerId, name: String },
    #[error("assertion '{name}' misconfigured: {message}")]
    AssertionConfig { name: String, message: String },
}

/// Full copy of an environment's mutable parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSnapshot<A, U> {
    pub state: GlobalState<A, U>,
    pub preamble: Vec<InitCall>,
    pub agent_controls_user_tools: bool,
}

pub struct Environment<D: Domain> {
    domain: Arc<D>,
    state: State<D>,
    preamble: Vec<InitCall>,
    agent_controls_user_tools: bool,
}

impl<D: Domain> Clone for Environment<D> {
    fn clone(&self) -> Self {
        Environment {
            domain: Arc::clone(&self.domain),
            state: self.state.clone(),
            preamble: self.preamble.clone(),
            agent_controls_user_tools: self.agent_controls_user_tools,
        }
    }
}

impl<D: Domain> fmt::Debug for Environment<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("domain", &self.domain.name())
            .field("history_len", &self.state.history.len())
            .field("preamble", &self.preamble)
            .finish()
    }
}

impl<D: Domain> Environment<D> {
    /// Fresh environment over the domain's seed world.
    pub fn new(domain: Arc<D>) -> Self {
        let world = domain.seed_world();
        Environment {
            domain,
            state: GlobalState::new(world),
            preamble: Vec::new(),
            agent_controls_user_tools: false,
        }
    }

    pub fn domain(&self) -> &Arc<D> {
        &self.domain
    }

    pub fn world(&self) -> &World<D> {
        &self.state.world
    }

    pub fn world_mut(&mut self) -> &mut World<D> {
        &mut self.state.world
    }

    pub fn state(&self) -> &State<D> {
        &self.state
    }

    pub fn history(&self) -> &[Event] {
        &self.state.history
    }

    pub fn preamble(&self) -> &[InitCall] {
        &self.preamble
    }

    pub fn into_state(self) -> State<D> {
        self.state
    }

    /// Lets the agent invoke user-owned tools (single-controller setting).
    pub fn grant_user_tools_to_agent(&mut self, granted: bool) {
        self.agent_controls_user_tools = granted;
    }

    pub fn agent_controls_user_tools(&self) -> bool {
        self.agent_controls_user_tools
    }

    pub fn may_invoke(&self, actor: PlayerId, spec: &ToolSpec) -> bool {
        spec.owner == actor
            || (actor == PlayerId::Agent
                && spec.owner == PlayerId::User
                && self.agent_controls_user_tools)
    }

    /// Tools `actor` may call in this environment.
    pub fn tool_specs_for(&self, actor: PlayerId) -> Vec<ToolSpec> {
        self.domain
            .tools()
            .iter()
            .filter(|t| self.may_invoke(actor, &t.spec))
            .map(|t| t.spec.clone())
            .collect()
    }

    pub fn hashes(&self) -> Result<WorldHashes, EncodingError> {
        self.state.world.hashes()
    }

    /// Runs one tool call. Never fails out-of-band: unknown tools, ownership
    /// violations, malformed arguments and domain failures all come back as
    /// error observations and leave the world untouched. Does not touch
    /// history.
    pub fn execute_tool(&mut self, actor: PlayerId, call: &ToolCall) -> Observation {
        let Some(tool) = self.domain.tools().get(&call.name) else {
            return Observation::error(format!("unknown tool: {}", call.name));
        };
        if !self.may_invoke(actor, &tool.spec) {
            return Observation::error(format!(
                "not permitted: {} may not call {}",
                actor, call.name
            ));
        }
        if let Err(message) = tool.spec.validate(&call.args) {
            return Observation::error(format!("invalid arguments: {message}"));
        }
        match tool.imp {
            ToolImpl::Read(f) => match f(&self.state.world, &call.args) {
                Ok(out) => Observation::ok(out),
                Err(message) => Observation::error(format!("error: {message}")),
            },
            ToolImpl::Write(f) => {
                let mut next = self.state.world.clone();
                match f(&mut next, &call.args) {
                    Ok(out) => {
                        self.state.world = next;
                        Observation::ok(out)
                    }
                    Err(message) => Observation::error(format!("error: {message}")),
                }
            }
        }
    }

    /// Transition: applies `action` for `actor`, appends the event and
    /// returns the observation it produced. For a message, the observation
    /// is what the other player receives.
    pub fn step(&mut self, actor: PlayerId, action: Action) -> Observation {
        let observation = match &action {
            Action::ToolCall(call) => self.execute_tool(actor, call),
            Action::Message { text } => Observation::IncomingMessage {
                from: actor,
                text: text.clone(),
            },
        };
        self.push_event(actor, EventBody::Act(action), observation.clone());
        observation
    }

    /// Records a policy output that could not be turned into an action. The
    /// error observation goes back to `actor`.
    pub fn record_rejection(&mut self, actor: PlayerId, raw: String, reason: String) -> Observation {
        let observation = Observation::error(format!("invalid output: {reason}"));
        self.push_event(actor, EventBody::Rejected { raw, reason }, observation.clone());
        observation
    }

    fn push_event(&mut self, actor: PlayerId, body: EventBody, observation: Observation) {
        let event = Event {
            index: self.state.history.len(),
            actor,
            body,
            observation: Some(observation),
        };
        self.state
            .append_event(event)
            .expect("index taken from history length");
    }

    /// Applies privileged setup calls in order. They go to the preamble, not
    /// to the conversational history. Either all calls apply or none do.
    pub fn apply_init(&mut self, calls: &[InitCall]) -> Result<(), EnvError> {
        let mut world = self.state.world.clone();
        for call in calls {
            let f = self.domain.init_function(call.env, &call.name).ok_or_else(|| {
                EnvError::UnknownInit {
                    env: call.env,
                    name: call.name.clone(),
                }
            })?;
            f(&mut world, &call.args).map_err(|message| EnvError::InitFailed {
                name: call.name.clone(),
                message,
            })?;
        }
        self.state.world = world;
        self.preamble.extend(calls.iter().cloned());
        Ok(())
    }

    /// Evaluates a named assertion against the current state.
    pub fn evaluate_assertion(
        &self,
        env: PlayerId,
        name: &str,
        args: &Args,
    ) -> Result<bool, EnvError> {
        evaluate_assertion(&*self.domain, &self.state, env, name, args)
    }

    pub fn snapshot(&self) -> EnvSnapshot<D::AgentDb, D::UserDb> {
        EnvSnapshot {
            state: self.state.clone(),
            preamble: self.preamble.clone(),
            agent_controls_user_tools: self.agent_controls_user_tools,
        }
    }

    pub fn restore(&mut self, snapshot: &EnvSnapshot<D::AgentDb, D::UserDb>) {
        self.state = snapshot.state.clone();
        self.preamble = snapshot.preamble.clone();
        self.agent_controls_user_tools = snapshot.agent_controls_user_tools;
    }

    pub fn from_snapshot(domain: Arc<D>, snapshot: EnvSnapshot<D::AgentDb, D::UserDb>) -> Self {
        Environment {
            domain,
            state: snapshot.state,
            preamble: snapshot.preamble,
            agent_controls_user_tools: snapshot.agent_controls_user_tools,
        }
    }
}

pub fn evaluate_assertion<D: Domain>(
    domain: &D,
    state: &State<D>,
    env: PlayerId,
    name: &str,
    args: &Args,
) -> Result<bool, EnvError> {
    let f = domain
        .assertion(env, name)
        .ok_or_else(|| EnvError::UnknownAssertion {
            env,
            name: name.to_string(),
        })?;
    f(state, args).map_err(|message| EnvError::AssertionConfig {
        name: name.to_string(),
        message,
    })
}

/// Tool-count summary keyed by (owner, kind).
pub fn tool_budget<D: Domain>(registry: &ToolRegistry<D>) -> BTreeMap<(PlayerId, &'static str), usize> {
    let mut out = BTreeMap::new();
    for owner in PlayerId::ALL {
        out.insert((owner, "read"), registry.count(owner, ToolKind::Read));
        out.insert((owner, "write"), registry.count(owner, ToolKind::Write));
    }
    out
}

#[cfg(test)]
pub(crate) mod mock {
    //! Two-counter toy domain for engine-level tests.
    use super::*;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct Counter {
        pub value: i64,
    }

    pub struct Mock {
        registry: ToolRegistry<Mock>,
    }

    fn read_value(world: &World<Mock>, _: &Args) -> Result<String, String> {
        Ok(world.agent_db.value.to_string())
    }

    fn add(world: &mut World<Mock>, args: &Args) -> Result<String, String> {
        let by = args["by"].as_i64().unwrap();
        if by == 13 {
            // mutate first, then fail: the engine must still discard it
            world.agent_db.value += by;
            return Err("unlucky".into());
        }
        world.agent_db.value += by;
        Ok(format!("value is now {}", world.agent_db.value))
    }

    fn press(world: &mut World<Mock>, _: &Args) -> Result<String, String> {
        world.user_db.value += 1;
        Ok("pressed".into())
    }

    fn init_set(world: &mut World<Mock>, args: &Args) -> Result<(), String> {
        world.agent_db.value = args.get("value").and_then(Value::as_i64).ok_or("need value")?;
        Ok(())
    }

    fn assert_value(state: &State<Mock>, args: &Args) -> Result<bool, String> {
        let want = args.get("expected").and_then(Value::as_i64).ok_or("need expected")?;
        Ok(state.world.agent_db.value == want)
    }

    impl Mock {
        pub fn new() -> Self {
            let mut registry = ToolRegistry::new();
            registry
                .register(
                    ToolSpec {
                        name: "read_value".into(),
                        owner: PlayerId::Agent,
                        kind: ToolKind::Read,
                        params: vec![],
                        doc: "Read the counter.".into(),
                    },
                    ToolImpl::Read(read_value),
                )
                .unwrap();
            registry
                .register(
                    ToolSpec {
                        name: "add".into(),
                        owner: PlayerId::Agent,
                        kind: ToolKind::Write,
                        params: vec![ParamSpec::required("by", ParamType::Integer, "amount")],
                        doc: "Add to the counter.".into(),
                    },
                    ToolImpl::Write(add),
                )
                .unwrap();
            registry
                .register(
                    ToolSpec {
                        name: "press".into(),
                        owner: PlayerId::User,
                        kind: ToolKind::Write,
                        params: vec![],
                        doc: "Press the button.".into(),
                    },
                    ToolImpl::Write(press),
                )
                .unwrap();
            Mock { registry }
        }
    }

    impl Domain for Mock {
        type AgentDb = Counter;
        type UserDb = Counter;

        fn name(&self) -> &str {
            "mock"
        }

        fn seed_world(&self) -> World<Self> {
            WorldState {
                agent_db: Counter { value: 0 },
                user_db: Counter { value: 0 },
            }
        }

        fn tools(&self) -> &ToolRegistry<Self> {
            &self.registry
        }

        fn init_function(&self, env: PlayerId, name: &str) -> Option<InitFn<Self>> {
            match (env, name) {
                (PlayerId::Agent, "set_value") => Some(init_set),
                _ => None,
            }
        }

        fn assertion(&self, env: PlayerId, name: &str) -> Option<AssertionFn<Self>> {
            match (env, name) {
                (PlayerId::Agent, "assert_value") => Some(assert_value),
                _ => None,
            }
        }
    }
}
