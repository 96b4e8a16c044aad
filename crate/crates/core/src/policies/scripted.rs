//! Deterministic policies driven by a task's known solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use super::{first_mentioned, mentions};
use crate::evaluation::args_match;
use crate::orchestrator::{GoalProbe, Mode, Policy, PolicyError, PolicyView, STOP_TOKEN, TRANSFER_TOKEN};
use crate::tasks::{CompositeTask, ExpectedAction};
use crate::world::{Action, Args, Event, PlayerId, ToolCall};

pub const NULL_AGENT_REPLY: &str = "I'm sorry, I am not able to help with that right now.";
const AGENT_DONE: &str = "Your phone should be working normally now. Is there anything else I can help you with?";
const AGENT_TRANSFERRED: &str = "I have passed your case to a human agent, who will follow up with you about the bill.";
const AGENT_SOLO_DONE: &str = "The issue on this ticket is resolved.";
const USER_DONE: &str = "Great, it works now. Thanks for your help!";
const USER_TRANSFER: &str = "Thank you, I will wait for the human agent.";
const USER_GIVE_UP: &str = "This is taking too long, I will try again another time.";
const USER_CONFUSED: &str = "Sorry, I'm not sure what you want me to do on my phone. Could you tell me exactly which option to use?";
const USER_HESITATES: &str = "Sorry, which option was that again?";

/// Wording the oracle agent uses to ask for a user-side action.
pub fn request_text(action: &ExpectedAction) -> String {
    if action.arguments.is_empty() {
        format!("Please run `{}` on your phone and tell me what you see.", action.name)
    } else {
        format!(
            "Please run `{}` with {} on your phone and tell me what you see.",
            action.name,
            serde_json::to_string(&action.arguments).expect("args serialize")
        )
    }
}

fn successful_call(e: &Event, actor: PlayerId, expected: &ExpectedAction) -> bool {
    e.actor == actor
        && e.observation.as_ref().is_some_and(|o| !o.is_error())
        && e
            .tool_call()
            .is_some_and(|c| c.name == expected.name && args_match(&c.args, &expected.arguments))
}

/// Replays the expected actions: its own calls directly, user-side calls
/// by asking for them by name. Progress is read off the visible history.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    script: Vec<ExpectedAction>,
    transfer: bool,
}

pub fn oracle_agent(task: &CompositeTask) -> OracleAgent {
    OracleAgent {
        script: task.expected_actions().to_vec(),
        transfer: task.requires_transfer(),
    }
}

impl OracleAgent {
    fn next_action(&self, view: &PolicyView) -> Action {
        let h = &view.visible_history;
        let mut pos = 0;
        for expected in &self.script {
            let own = expected.requestor == PlayerId::Agent || view.mode == Mode::NoUser;
            if own {
                match h[pos..].iter().position(|e| successful_call(e, PlayerId::Agent, expected)) {
                    Some(i) => pos += i + 1,
                    None => return Action::tool(expected.to_call()),
                }
            } else {
                let request = request_text(expected);
                let asked = h[pos..]
                    .iter()
                    .position(|e| e.actor == PlayerId::Agent && e.message() == Some(request.as_str()));
                let Some(i) = asked.map(|i| pos + i) else {
                    return Action::message(request);
                };
                let reported = h[i + 1..].iter().position(|e| {
                    e.actor == PlayerId::User && e.message().is_some_and(|m| mentions(m, &expected.name))
                });
                match reported {
                    Some(j) => pos = i + 1 + j + 1,
                    None => return Action::message(request),
                }
            }
        }
        match (view.mode, self.transfer) {
            (Mode::NoUser, _) => Action::message(format!("{AGENT_SOLO_DONE} {STOP_TOKEN}")),
            (_, true) => Action::message(AGENT_TRANSFERRED),
            (_, false) => Action::message(AGENT_DONE),
        }
    }
}

impl Policy for OracleAgent {
    fn id(&self) -> String {
        "oracle_agent".into()
    }

    fn decide(&mut self, view: &PolicyView, _probe: &dyn GoalProbe) -> Result<Action, PolicyError> {
        Ok(self.next_action(view))
    }
}

/// Always answers with the same unhelpful message.
#[derive(Debug, Clone, Default)]
pub struct NullAgent;

pub fn null_agent() -> NullAgent {
    NullAgent
}

impl Policy for NullAgent {
    fn id(&self) -> String {
        "null_agent".into()
    }

    fn decide(&mut self, _view: &PolicyView, _probe: &dyn GoalProbe) -> Result<Action, PolicyError> {
        Ok(Action::message(NULL_AGENT_REPLY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArgSource {
    /// Arguments come from the task's expected user actions.
    Script,
    /// Arguments come from a JSON object following the tool name.
    Message,
}

/// Simulated user that runs whichever of its tools the agent names.
#[derive(Debug, Clone)]
pub struct ScriptedUser {
    task: CompositeTask,
    source: ArgSource,
    /// Messages the user sends before giving up.
    pub patience: usize,
    noise: Option<(ChaCha8Rng, f64)>,
}

pub fn oracle_user(task: &CompositeTask) -> ScriptedUser {
    ScriptedUser {
        task: task.clone(),
        source: ArgSource::Script,
        patience: 12,
        noise: None,
    }
}

/// Executes any of its tools the agent names, on or off script.
pub fn compliance_user(task: &CompositeTask) -> ScriptedUser {
    ScriptedUser {
        source: ArgSource::Message,
        ..oracle_user(task)
    }
}

/// Oracle user that, with probability `p`, hesitates instead of running a
/// requested tool. Seeded per trial.
pub fn noisy_user(task: &CompositeTask, seed: u64, p: f64) -> ScriptedUser {
    ScriptedUser {
        noise: Some((ChaCha8Rng::seed_from_u64(seed), p)),
        ..oracle_user(task)
    }
}

fn first_person(text: &str) -> String {
    text.replace("You are", "I am")
        .replace("you are", "I am")
        .replace("Your", "My")
        .replace("your", "my")
        .replace("You", "I")
}

/// A JSON object right after the first mention of `name`.
fn inline_args(text: &str, name: &str) -> Option<Args> {
    let start = super::mention_positions(text, name).first()? + name.len();
    let rest = text[start..].trim_start_matches('`').trim_start();
    let rest = rest.strip_prefix("with")?.trim_start();
    if !rest.starts_with('{') {
        return None;
    }
    let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<Value>();
    match stream.next()? {
        Ok(Value::Object(map)) => Some(map.into_iter().collect()),
        _ => None,
    }
}

impl ScriptedUser {
    fn args_for(&self, name: &str, message: &str, view: &PolicyView) -> Args {
        if self.source == ArgSource::Script {
            let done = |a: &ExpectedAction| {
                view.visible_history
                    .iter()
                    .any(|e| successful_call(e, PlayerId::User, a))
            };
            let candidates: Vec<&ExpectedAction> = self.task.user_actions().filter(|a| a.name == name).collect();
            if let Some(a) = candidates.iter().find(|a| !done(a)).or(candidates.first()) {
                return a.arguments.clone();
            }
        }
        inline_args(message, name).unwrap_or_default()
    }

    fn opening(&self) -> String {
        let i = &self.task.user_scenario.instructions;
        format!("Hi. {} {}", first_person(&i.known_info), first_person(&i.reason_for_call))
    }

    fn next_action(&mut self, view: &PolicyView, probe: &dyn GoalProbe) -> Action {
        if probe.goal_reached() {
            return if self.task.requires_transfer() {
                Action::message(format!("{USER_TRANSFER} {TRANSFER_TOKEN}"))
            } else {
                Action::message(format!("{USER_DONE} {STOP_TOKEN}"))
            };
        }
        let h = &view.visible_history;
        let (last_idx, last_text) = match view.last_incoming_message() {
            Some((i, t)) => (Some(i), t.to_string()),
            None => (None, String::new()),
        };
        let since = last_idx.map_or(0, |i| i + 1);
        if let Some(e) = h[since..]
            .iter()
            .rev()
            .find(|e| e.actor == PlayerId::User && e.tool_call().is_some())
        {
            let name = &e.tool_call().expect("checked").name;
            let seen = e.observation.as_ref().map(|o| o.text()).unwrap_or_default();
            return Action::message(format!("I ran {name}. This is what I see:\n{seen}"));
        }
        let sent = h
            .iter()
            .filter(|e| e.actor == PlayerId::User && e.message().is_some())
            .count();
        if sent >= self.patience {
            return Action::message(format!("{USER_GIVE_UP} {STOP_TOKEN}"));
        }
        let names = view
            .tool_specs
            .iter()
            .filter(|s| s.owner == PlayerId::User)
            .map(|s| s.name.as_str());
        if let Some(name) = first_mentioned(&last_text, names) {
            if let Some((rng, p)) = self.noise.as_mut() {
                if rng.random_bool(*p) {
                    return Action::message(USER_HESITATES);
                }
            }
            let args = self.args_for(name, &last_text, view);
            return Action::tool(ToolCall::with_args(name, args));
        }
        if sent == 0 {
            return Action::message(self.opening());
        }
        if let Some(unknown) = backticked(&last_text) {
            return Action::message(format!("I can't find anything called `{unknown}` on my phone. What should I do instead?"));
        }
        Action::message(USER_CONFUSED)
    }
}

fn backticked(text: &str) -> Option<&str> {
    let start = text.find('`')? + 1;
    let len = text[start..].find('`')?;
    Some(&text[start..start + len]).filter(|s| !s.is_empty())
}

impl Policy for ScriptedUser {
    fn id(&self) -> String {
        match (self.source, &self.noise) {
            (ArgSource::Script, None) => "oracle_user".into(),
            (ArgSource::Script, Some((_, p))) => format!("noisy_user(p={p})"),
            (ArgSource::Message, _) => "compliance_user".into(),
        }
    }

    fn decide(&mut self, view: &PolicyView, probe: &dyn GoalProbe) -> Result<Action, PolicyError> {
        Ok(self.next_action(view, probe))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_args_follow_the_name() {
        let text = "Please run `grant_app_permission` with {\"app_name\":\"messaging\",\"permission\":\"sms\"} on your phone.";
        let args = inline_args(text, "grant_app_permission").unwrap();
        assert_eq!(args["permission"], "sms");
        assert!(inline_args("Please run `toggle_wifi` on your phone.", "toggle_wifi").is_none());
    }

    #[test]
    fn first_person_rewrite() {
        assert_eq!(
            first_person("You are John Smith with phone number 555-123-2002."),
            "I am John Smith with phone number 555-123-2002."
        );
        assert_eq!(
            first_person("Your phone has been showing 'No Service'."),
            "My phone has been showing 'No Service'."
        );
    }

    #[test]
    fn backtick_extraction() {
        assert_eq!(backticked("run `fix_everything` please"), Some("fix_everything"));
        assert_eq!(backticked("no ticks"), None);
    }
}
