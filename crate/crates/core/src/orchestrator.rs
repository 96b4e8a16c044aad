//! Turn-taking loop: two policies, one environment, termination rules.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{Domain, EnvError, Environment, State, ToolSpec};
use crate::tasks::render::render_user_instructions;
use crate::tasks::CompositeTask;
use crate::world::{state_hash, Action, EncodingError, Event, EventBody, PlayerId, WorldHashes};

pub const GREETING: &str = "Hi! How can I help you today?";
pub const STOP_TOKEN: &str = "###STOP###";
pub const TRANSFER_TOKEN: &str = "###TRANSFER###";

pub const AGENT_PROMPT_TEMPLATE: &str = "<instructions>
You are a customer service agent that helps the user according to the <policy> provided below.
In each turn you can either:
- Send a message to the user.
- Make a tool call.
You cannot do both at the same time.

Try to be helpful and always follow the policy. Always make sure you generate valid JSON only.
</instructions>
<policy>
{domain_policy}
</policy>";

/// Guideline text for simulated users. Our own wording.
pub const USER_GUIDELINE: &str = "# Playing the customer
You are a customer talking to a support agent. The scenario below says who you are and what you want.
- Share details only when the agent asks for them, and never make up facts the scenario does not give you.
- Write short, natural messages, one step at a time.
- Your phone tools act on your own device. Use one only when the agent asks you to, then tell the agent what you saw.
- When your issue is resolved, end the conversation with a message containing ###STOP###.
- If the agent hands you over to a human agent, end with a message containing ###TRANSFER###.";

const USER_GUIDELINE_NO_TOOLS: &str = "# Playing the customer
You are a customer talking to a support agent. The scenario below says who you are and what you want.
- Share details only when the agent asks for them, and never make up facts the scenario does not give you.
- Write short, natural messages, one step at a time.
- When your issue is resolved, end the conversation with a message containing ###STOP###.
- If the agent hands you over to a human agent, end with a message containing ###TRANSFER###.";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Default,
    NoUser,
    GroundTruth,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Default, Mode::NoUser, Mode::GroundTruth];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Default => "default",
            Mode::NoUser => "no_user",
            Mode::GroundTruth => "ground_truth",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mode '{s}' (expected default, no_user or ground_truth)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub max_steps: usize,
    pub max_consecutive_errors: usize,
    pub seed: u64,
    pub trials_per_task: usize,
    pub mode: Mode,
    /// A decision that takes longer is discarded and recorded as an error.
    pub decision_timeout_ms: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_steps: 200,
            max_consecutive_errors: 3,
            seed: 0,
            trials_per_task: 1,
            mode: Mode::Default,
            decision_timeout_ms: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("max_steps", self.max_steps),
            ("max_consecutive_errors", self.max_consecutive_errors),
            ("trials_per_task", self.trials_per_task),
        ] {
            if v == 0 {
                return Err(SimError::Config(format!("{name} must be positive")));
            }
        }
        if self.decision_timeout_ms == Some(0) {
            return Err(SimError::Config("decision_timeout_ms must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    UserStop,
    UserTransfer,
    AgentStop,
    MaxSteps,
    ErrorLimit,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::UserStop => "user_stop",
            StopReason::UserTransfer => "user_transfer",
            StopReason::AgentStop => "agent_stop",
            StopReason::MaxSteps => "max_steps",
            StopReason::ErrorLimit => "error_limit",
        }
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopSignal {
    None,
    Stop,
    Transfer,
}

/// Scans for the stop tokens anywhere in the text. Transfer wins over stop.
pub fn detect_stop(text: &str) -> StopSignal {
    if text.contains(TRANSFER_TOKEN) {
        StopSignal::Transfer
    } else if text.contains(STOP_TOKEN) {
        StopSignal::Stop
    } else {
        StopSignal::None
    }
}

/// Everything one role is allowed to see when it decides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyView {
    pub role: PlayerId,
    pub mode: Mode,
    pub instructions: String,
    pub tool_specs: Vec<ToolSpec>,
    pub visible_history: Vec<Event>,
}

impl PolicyView {
    /// Text of the most recent message from the other role.
    pub fn last_incoming_message(&self) -> Option<(usize, &str)> {
        self.visible_history
            .iter()
            .enumerate()
            .rev()
            .find(|(_, e)| e.actor != self.role)
            .and_then(|(i, e)| e.message().map(|m| (i, m)))
    }
}

/// Own events in full, plus the other role's messages. The other role's
/// tool calls, results and rejected outputs are never included.
pub fn visible_history(role: PlayerId, history: &[Event]) -> Vec<Event> {
    history
        .iter()
        .filter(|e| e.actor == role || e.message().is_some())
        .cloned()
        .collect()
}

fn solution_listing(task: &CompositeTask) -> String {
    task.expected_actions()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            format!(
                "{}. {} calls {} with arguments {}",
                i + 1,
                a.requestor,
                a.name,
                serde_json::to_string(&a.arguments).expect("args serialize")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn agent_instructions(domain_policy: &str, task: &CompositeTask, mode: Mode) -> String {
    let mut policy = domain_policy.trim_end().to_string();
    match mode {
        Mode::Default => {}
        Mode::NoUser => {
            policy.push_str(&format!(
                "\n\n## Working from a ticket\nNo customer is on the line. You can call the customer's phone tools yourself, so perform each phone step directly instead of asking for it. When the issue is resolved, send a message containing {STOP_TOKEN}.\n\n## Ticket\n{}",
                task.ticket
            ));
        }
        Mode::GroundTruth => {
            policy.push_str("\n\n## Resolution steps\nThese tool calls, in this order, resolve the issue:\n");
            policy.push_str(&solution_listing(task));
        }
    }
    AGENT_PROMPT_TEMPLATE.replace("{domain_policy}", &policy)
}

pub fn user_instructions(task: &CompositeTask, has_tools: bool) -> String {
    let guideline = if has_tools { USER_GUIDELINE } else { USER_GUIDELINE_NO_TOOLS };
    format!(
        "{guideline}\n\n<scenario>\n{}</scenario>",
        render_user_instructions(task)
    )
}

pub fn build_view<D: Domain>(env: &Environment<D>, role: PlayerId, task: &CompositeTask, mode: Mode) -> PolicyView {
    let tool_specs = env.tool_specs_for(role);
    let instructions = match role {
        PlayerId::Agent => agent_instructions(&env.domain().agent_policy(), task, mode),
        PlayerId::User => user_instructions(task, !tool_specs.is_empty()),
    };
    PolicyView {
        role,
        mode,
        instructions,
        tool_specs,
        visible_history: visible_history(role, env.history()),
    }
}

/// Read-only answer to "would every task assertion pass right now?".
pub trait GoalProbe {
    fn goal_reached(&self) -> bool;
}

/// Output a policy produced but that is not a single well-formed action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyError {
    pub raw: String,
    pub reason: String,
}

impl PolicyError {
    pub fn new(raw: impl Into<String>, reason: impl Into<String>) -> Self {
        PolicyError {
            raw: raw.into(),
            reason: reason.into(),
        }
    }
}

/// The seam every policy implements: one view in, one action out.
pub trait Policy: Send {
    fn id(&self) -> String;
    fn decide(&mut self, view: &PolicyView, probe: &dyn GoalProbe) -> Result<Action, PolicyError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub trial_index: usize,
    pub mode: Mode,
    pub seed: u64,
    pub events: Vec<Event>,
    pub stop_reason: StopReason,
    pub initial_world_hashes: WorldHashes,
    pub final_world_hashes: WorldHashes,
}

impl Trajectory {
    /// Digest of the observable run (events, outcome, final state),
    /// independent of the trial index.
    pub fn digest(&self) -> String {
        state_hash(&(&self.events, self.stop_reason, &self.final_world_hashes)).expect("trajectory encodes")
    }

    pub fn step_count(&self) -> usize {
        self.events.len()
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("not your turn")]
    NotYourTurn,
    #[error("simulation already finished")]
    Finished,
    #[error("simulation has not finished")]
    NotFinished,
    #[error("replay diverged at event {index}: {detail}")]
    Diverged { index: usize, detail: String },
}

/// Per-trial seed from the run seed, task and trial index.
pub fn trial_seed(run_seed: u64, task_id: &str, trial_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(task_id.as_bytes());
    h.update((trial_index as u64).to_le_bytes());
    let bytes = h.finalize();
    u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
}

/// One task, one trial, advanced one decision at a time.
pub struct Simulation<D: Domain> {
    task: CompositeTask,
    env: Environment<D>,
    config: RunConfig,
    trial_index: usize,
    seed: u64,
    turn: PlayerId,
    consecutive_errors: usize,
    stop: Option<StopReason>,
    initial_hashes: WorldHashes,
}

impl<D: Domain> Simulation<D> {
    /// Fresh environment, task init applied, greeting sent (except in
    /// no_user mode, where the agent simply acts first).
    pub fn new(domain: Arc<D>, task: CompositeTask, config: RunConfig, trial_index: usize) -> Result<Self, SimError> {
        config.validate()?;
        let mut env = Environment::new(domain);
        env.grant_user_tools_to_agent(config.mode == Mode::NoUser);
        env.apply_init(task.init_actions())?;
        let initial_hashes = env.hashes()?;
        let seed = trial_seed(config.seed, &task.id, trial_index);
        let mut sim = Simulation {
            task,
            env,
            config,
            trial_index,
            seed,
            turn: PlayerId::Agent,
            consecutive_errors: 0,
            stop: None,
            initial_hashes,
        };
        if sim.config.mode != Mode::NoUser {
            sim.env.step(PlayerId::Agent, Action::message(GREETING));
            sim.turn = PlayerId::User;
            sim.check_limits();
        }
        Ok(sim)
    }

    /// Rebuilds a simulation by feeding it a recorded event sequence. Each
    /// re-executed event must reproduce the recorded observation.
    pub fn resume(
        domain: Arc<D>,
        task: CompositeTask,
        config: RunConfig,
        trial_index: usize,
        events: &[Event],
    ) -> Result<Self, SimError> {
        let mut sim = Simulation::new(domain, task, config, trial_index)?;
        let start = sim.history().len();
        if events.len() < start || events[..start] != *sim.history() {
            return Err(SimError::Diverged {
                index: 0,
                detail: "opening events differ".into(),
            });
        }
        for recorded in &events[start..] {
            if sim.turn() != Some(recorded.actor) {
                return Err(SimError::Diverged {
                    index: recorded.index,
                    detail: format!("{} acted out of turn", recorded.actor),
                });
            }
            let decision = match &recorded.body {
                EventBody::Act(action) => Ok(action.clone()),
                EventBody::Rejected { raw, reason } => Err(PolicyError::new(raw.clone(), reason.clone())),
            };
            let replayed = sim.submit(recorded.actor, decision)?;
            if replayed != *recorded {
                return Err(SimError::Diverged {
                    index: recorded.index,
                    detail: "observation differs from the recording".into(),
                });
            }
        }
        Ok(sim)
    }

    /// Whose decision is pending, or `None` once finished.
    pub fn turn(&self) -> Option<PlayerId> {
        if self.stop.is_some() {
            None
        } else {
            Some(self.turn)
        }
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    pub fn task(&self) -> &CompositeTask {
        &self.task
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn env(&self) -> &Environment<D> {
        &self.env
    }

    pub fn history(&self) -> &[Event] {
        self.env.history()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial_index(&self) -> usize {
        self.trial_index
    }

    pub fn view(&self, role: PlayerId) -> PolicyView {
        build_view(&self.env, role, &self.task, self.config.mode)
    }

    /// Applies one decision by `actor` and returns the recorded event.
    pub fn submit(&mut self, actor: PlayerId, decision: Result<Action, PolicyError>) -> Result<Event, SimError> {
        let turn = self.turn().ok_or(SimError::Finished)?;
        if actor != turn {
            return Err(SimError::NotYourTurn);
        }
        match decision {
            Err(PolicyError { raw, reason }) => {
                self.env.record_rejection(actor, raw, reason);
                self.consecutive_errors += 1;
            }
            Ok(action) => {
                let is_message = matches!(action, Action::Message { .. });
                let signal = match &action {
                    Action::Message { text } => detect_stop(text),
                    Action::ToolCall(_) => StopSignal::None,
                };
                let obs = self.env.step(actor, action);
                if obs.is_error() {
                    self.consecutive_errors += 1;
                } else {
                    self.consecutive_errors = 0;
                }
                if is_message {
                    match (self.config.mode, actor, signal) {
                        (_, PlayerId::User, StopSignal::Transfer) => self.stop = Some(StopReason::UserTransfer),
                        (_, PlayerId::User, StopSignal::Stop) => self.stop = Some(StopReason::UserStop),
                        (Mode::NoUser, PlayerId::Agent, StopSignal::Stop | StopSignal::Transfer) => {
                            self.stop = Some(StopReason::AgentStop)
                        }
                        _ => {}
                    }
                    if self.config.mode != Mode::NoUser {
                        self.turn = actor.other();
                    }
                }
            }
        }
        self.check_limits();
        Ok(self.env.history().last().cloned().expect("event just recorded"))
    }

    fn check_limits(&mut self) {
        if self.stop.is_some() {
            return;
        }
        if self.consecutive_errors >= self.config.max_consecutive_errors {
            self.stop = Some(StopReason::ErrorLimit);
        } else if self.env.history().len() >= self.config.max_steps {
            self.stop = Some(StopReason::MaxSteps);
        }
    }

    /// Asks `policy` for the pending decision and applies it.
    pub fn advance(&mut self, policy: &mut dyn Policy) -> Result<Event, SimError> {
        let actor = self.turn().ok_or(SimError::Finished)?;
        let view = self.view(actor);
        let started = Instant::now();
        let mut decision = policy.decide(&view, &*self);
        if let Some(ms) = self.config.decision_timeout_ms {
            if started.elapsed() > Duration::from_millis(ms) {
                let raw = match &decision {
                    Ok(a) => serde_json::to_string(a).expect("action serializes"),
                    Err(e) => e.raw.clone(),
                };
                decision = Err(PolicyError::new(raw, format!("decision timed out after {ms} ms")));
            }
        }
        self.submit(actor, decision)
    }

    pub fn final_state(&self) -> &State<D> {
        self.env.state()
    }

    /// The trajectory so far; requires the run to have finished.
    pub fn trajectory(&self) -> Result<Trajectory, SimError> {
        let stop_reason = self.stop.ok_or(SimError::NotFinished)?;
        Ok(Trajectory {
            task_id: self.task.id.clone(),
            trial_index: self.trial_index,
            mode: self.config.mode,
            seed: self.seed,
            events: self.env.history().to_vec(),
            stop_reason,
            initial_world_hashes: self.initial_hashes.clone(),
            final_world_hashes: self.env.hashes()?,
        })
    }

    /// The finished trajectory plus the environment it left behind.
    pub fn finish(self) -> Result<(Trajectory, Environment<D>), SimError> {
        let trajectory = self.trajectory()?;
        Ok((trajectory, self.env))
    }
}

impl<D: Domain> GoalProbe for Simulation<D> {
    fn goal_reached(&self) -> bool {
        crate::tasks::verify::task_solved(&self.task, &self.env).unwrap_or(false)
    }
}

/// Policies for one trial. `user` is ignored in no_user mode.
pub struct PolicyPair {
    pub agent: Box<dyn Policy>,
    pub user: Option<Box<dyn Policy>>,
}

/// Runs one trial to completion.
pub fn run_simulation<D: Domain>(
    domain: Arc<D>,
    task: &CompositeTask,
    agent: &mut dyn Policy,
    mut user: Option<&mut dyn Policy>,
    config: &RunConfig,
    trial_index: usize,
) -> Result<(Trajectory, Environment<D>), SimError> {
    if config.mode != Mode::NoUser && user.is_none() {
        return Err(SimError::Config(format!("mode {} needs a user policy", config.mode)));
    }
    let mut sim = Simulation::new(domain, task.clone(), config.clone(), trial_index)?;
    while let Some(actor) = sim.turn() {
        match actor {
            PlayerId::Agent => sim.advance(agent)?,
            PlayerId::User => sim.advance(user.as_deref_mut().expect("checked above"))?,
        };
    }
    sim.finish()
}

/// Builds the policies for (task, trial index, trial seed).
pub type PolicyFactory<'a> = dyn Fn(&CompositeTask, usize, u64) -> PolicyPair + Sync + 'a;

/// `config.trials_per_task` independent trials, in parallel.
pub fn run_trials<D: Domain>(
    domain: Arc<D>,
    task: &CompositeTask,
    factory: &PolicyFactory<'_>,
    config: &RunConfig,
) -> Result<Vec<(Trajectory, Environment<D>)>, SimError> {
    config.validate()?;
    (0..config.trials_per_task)
        .into_par_iter()
        .map(|trial| {
            let mut pair = factory(task, trial, trial_seed(config.seed, &task.id, trial));
            run_simulation(
                Arc::clone(&domain),
                task,
                pair.agent.as_mut(),
                pair.user.as_mut().map(|u| u.as_mut() as &mut dyn Policy),
                config,
                trial,
            )
        })
        .collect()
}

/// Every task times every trial, ordered by task then trial.
pub fn run_suite<D: Domain>(
    domain: Arc<D>,
    tasks: &[CompositeTask],
    factory: &PolicyFactory<'_>,
    config: &RunConfig,
) -> Result<Vec<(Trajectory, Environment<D>)>, SimError> {
    config.validate()?;
    let per_task: Vec<Vec<_>> = tasks
        .par_iter()
        .map(|task| run_trials(Arc::clone(&domain), task, factory, config))
        .collect::<Result<_, _>>()?;
    Ok(per_task.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ToolCall;

    #[test]
    fn stop_token_table() {
        let cases = [
            ("Thanks! Have a wonderful day! ###STOP###", StopSignal::Stop),
            ("my phone still shows no service", StopSignal::None),
            ("###TRANSFER###", StopSignal::Transfer),
            ("ok ###STOP### and ###TRANSFER###", StopSignal::Transfer),
            ("###TRANSFER### then ###STOP###", StopSignal::Transfer),
            ("##STOP##", StopSignal::None),
            ("please ###STOP### now", StopSignal::Stop),
        ];
        for (text, expected) in cases {
            assert_eq!(detect_stop(text), expected, "{text}");
        }
    }

    #[test]
    fn modes_parse_and_print() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_value(m).unwrap(), m.as_str());
        }
        assert!("solo".parse::<Mode>().is_err());
    }

    #[test]
    fn zero_counts_rejected() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.trials_per_task = 0;
        assert!(matches!(c.validate(), Err(SimError::Config(_))));
        let c = RunConfig { max_steps: 0, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn trial_seeds_differ_by_trial_and_task() {
        let a = trial_seed(7, "t", 0);
        assert_eq!(a, trial_seed(7, "t", 0));
        assert_ne!(a, trial_seed(7, "t", 1));
        assert_ne!(a, trial_seed(7, "u", 0));
        assert_ne!(a, trial_seed(8, "t", 0));
    }

    #[test]
    fn visible_history_hides_other_tool_results() {
        let mk = |index, actor, body| Event {
            index,
            actor,
            body,
            observation: None,
        };
        let history = vec![
            mk(0, PlayerId::Agent, EventBody::Act(Action::message("hi"))),
            mk(1, PlayerId::User, EventBody::Act(Action::tool(ToolCall::new("check_status_bar")))),
            mk(2, PlayerId::User, EventBody::Rejected { raw: "x".into(), reason: "y".into() }),
            mk(3, PlayerId::User, EventBody::Act(Action::message("help"))),
            mk(4, PlayerId::Agent, EventBody::Act(Action::tool(ToolCall::new("get_customer_by_phone")))),
        ];
        let agent: Vec<usize> = visible_history(PlayerId::Agent, &history).iter().map(|e| e.index).collect();
        let user: Vec<usize> = visible_history(PlayerId::User, &history).iter().map(|e| e.index).collect();
        assert_eq!(agent, vec![0, 3, 4]);
        assert_eq!(user, vec![0, 1, 2, 3]);
    }
}
