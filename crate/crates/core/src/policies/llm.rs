//! Chat-completion adapter: renders a view as a request, parses one action
//! back out of the reply.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::orchestrator::{GoalProbe, Policy, PolicyError, PolicyView};
use crate::world::{Action, Args, EventBody, ToolCall};

pub const ENDPOINT_VAR: &str = "DUET_LLM_ENDPOINT";
pub const KEY_VAR: &str = "DUET_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmPolicyConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    /// Extra attempts after a transport failure.
    pub retries: u32,
    pub timeout_ms: u64,
    /// Never serialized; read from the environment.
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for LlmPolicyConfig {
    fn default() -> Self {
        LlmPolicyConfig {
            endpoint: String::new(),
            model: String::new(),
            temperature: 0.0,
            max_output_tokens: 1024,
            retries: 2,
            timeout_ms: 60_000,
            api_key: None,
        }
    }
}

impl LlmPolicyConfig {
    /// Endpoint and key from `DUET_LLM_ENDPOINT` / `DUET_LLM_KEY` when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(endpoint) = std::env::var(ENDPOINT_VAR) {
            if !endpoint.is_empty() {
                self.endpoint = endpoint;
            }
        }
        if let Ok(key) = std::env::var(KEY_VAR) {
            if !key.is_empty() {
                self.api_key = Some(key);
            }
        }
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Request(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
}

pub trait ChatTransport: Send {
    fn complete(&self, request: &Value) -> Result<Value, TransportError>;
}

/// Blocking HTTP transport with bearer authentication.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(config: &LlmPolicyConfig) -> Result<Self, TransportError> {
        if config.endpoint.is_empty() {
            return Err(TransportError::Request(format!(
                "no endpoint configured (set {ENDPOINT_VAR} or llm.endpoint)"
            )));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| TransportError::Request(e.to_string()))?;
        Ok(HttpTransport {
            client,
            endpoint: config.endpoint.clone(),
            api_key: config.api_key.clone(),
        })
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &Value) -> Result<Value, TransportError> {
        let mut req = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError::Request(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(TransportError::Status {
                status: status.as_u16(),
                body: resp.text().unwrap_or_default(),
            });
        }
        resp.json().map_err(|e| TransportError::Request(e.to_string()))
    }
}

fn call_id(index: usize) -> String {
    format!("call_{index}")
}

/// Request body for one decision: system prompt, alternating history and
/// tool declarations.
pub fn render_request(view: &PolicyView, config: &LlmPolicyConfig) -> Value {
    let mut messages = vec![json!({ "role": "system", "content": view.instructions })];
    for e in &view.visible_history {
        let own = e.actor == view.role;
        let observation = e.observation.as_ref().map(|o| o.text().to_string()).unwrap_or_default();
        match (&e.body, own) {
            (EventBody::Act(Action::Message { text }), true) => {
                messages.push(json!({ "role": "assistant", "content": text }))
            }
            (EventBody::Act(Action::Message { text }), false) => {
                messages.push(json!({ "role": "user", "content": text }))
            }
            (EventBody::Act(Action::ToolCall(call)), true) => {
                messages.push(json!({
                    "role": "assistant",
                    "content": null,
                    "tool_calls": [{
                        "id": call_id(e.index),
                        "type": "function",
                        "function": {
                            "name": call.name,
                            "arguments": serde_json::to_string(&call.args).expect("args serialize"),
                        }
                    }]
                }));
                messages.push(json!({
                    "role": "tool",
                    "tool_call_id": call_id(e.index),
                    "content": observation,
                }));
            }
            (EventBody::Rejected { raw, .. }, true) => {
                messages.push(json!({ "role": "assistant", "content": raw }));
                messages.push(json!({ "role": "user", "content": observation }));
            }
            // other roles' tool calls and rejections never reach a view
            _ => {}
        }
    }
    let mut body = json!({
        "model": config.model,
        "temperature": config.temperature,
        "max_tokens": config.max_output_tokens,
        "messages": messages,
    });
    if !view.tool_specs.is_empty() {
        body["tools"] = Value::Array(view.tool_specs.iter().map(|s| s.to_chat_tool()).collect());
    }
    body
}

/// Exactly one message or exactly one tool call; anything else is rejected.
pub fn parse_response(response: &Value) -> Result<Action, PolicyError> {
    let raw = response.to_string();
    let message = response
        .pointer("/choices/0/message")
        .ok_or_else(|| PolicyError::new(raw.clone(), "response has no message"))?;
    let text = message
        .get("content")
        .and_then(Value::as_str)
        .map(str::trim)
        .filter(|s| !s.is_empty());
    let calls = message
        .get("tool_calls")
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or_default();
    let raw = serde_json::to_string(message).expect("value serializes");
    match (text, calls) {
        (_, [_, _, ..]) => Err(PolicyError::new(raw, "more than one tool call in a single turn")),
        (Some(_), [_]) => Err(PolicyError::new(
            raw,
            "cannot send a message and make a tool call at the same time",
        )),
        (None, [call]) => {
            let name = call
                .pointer("/function/name")
                .and_then(Value::as_str)
                .filter(|n| !n.is_empty())
                .ok_or_else(|| PolicyError::new(raw.clone(), "tool call without a name"))?;
            let arguments = call.pointer("/function/arguments").cloned().unwrap_or(Value::Null);
            let parsed: Value = match arguments {
                Value::String(s) if s.trim().is_empty() => json!({}),
                Value::String(s) => serde_json::from_str(&s)
                    .map_err(|e| PolicyError::new(raw.clone(), format!("malformed tool arguments: {e}")))?,
                Value::Null => json!({}),
                other => other,
            };
            let Value::Object(map) = parsed else {
                return Err(PolicyError::new(raw, "tool arguments must be a JSON object"));
            };
            let args: Args = map.into_iter().collect();
            Ok(Action::tool(ToolCall::with_args(name, args)))
        }
        (Some(t), []) => Ok(Action::message(t)),
        (None, []) => Err(PolicyError::new(raw, "empty response")),
    }
}

pub struct LlmPolicy<T: ChatTransport> {
    config: LlmPolicyConfig,
    transport: T,
    /// Requests sent, including retries.
    pub requests: u64,
}

impl<T: ChatTransport> LlmPolicy<T> {
    pub fn new(config: LlmPolicyConfig, transport: T) -> Self {
        LlmPolicy {
            config,
            transport,
            requests: 0,
        }
    }
}

impl<T: ChatTransport> Policy for LlmPolicy<T> {
    fn id(&self) -> String {
        format!("llm:{}@t={}", self.config.model, self.config.temperature)
    }

    fn decide(&mut self, view: &PolicyView, _probe: &dyn GoalProbe) -> Result<Action, PolicyError> {
        let request = render_request(view, &self.config);
        let mut last = None;
        for _ in 0..=self.config.retries {
            self.requests += 1;
            match self.transport.complete(&request) {
                Ok(response) => return parse_response(&response),
                Err(e) => last = Some(e),
            }
        }
        Err(PolicyError::new(
            "",
            format!("transport failure: {}", last.expect("at least one attempt")),
        ))
    }
}
