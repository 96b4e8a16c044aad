//! Live sessions where a human plays one role against a scripted policy.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Domain;
use crate::evaluation::{check_env_assertions, compute_reward, CriterionResult, EvalOptions};
use crate::orchestrator::{visible_history, Mode, Policy, PolicyView, RunConfig, SimError, Simulation, StopReason};
use crate::policies::{oracle_agent, oracle_user};
use crate::tasks::CompositeTask;
use crate::world::{Action, Event, PlayerId};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown session '{0}'")]
    NotFound(String),
    #[error("unknown task '{0}'")]
    UnknownTask(String),
    #[error("not your turn")]
    NotYourTurn,
    #[error("session already finished")]
    Finished,
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(SimError),
    #[error("checkpoint failed: {0}")]
    Checkpoint(String),
}

impl From<SimError> for SessionError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NotYourTurn => SessionError::NotYourTurn,
            SimError::Finished => SessionError::Finished,
            other => SessionError::Sim(other),
        }
    }
}

/// A fork of an earlier session. The parent stays untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub session_id: String,
    pub parent_session_id: String,
    /// The new branch keeps events `0..event_index` of the parent.
    pub event_index: usize,
    pub replacement: Option<Action>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub task_id: String,
    pub mode: Mode,
    pub human_role: PlayerId,
    pub parent_session_id: Option<String>,
    pub finished: bool,
    pub stop_reason: Option<StopReason>,
    pub event_count: usize,
}

/// What the human is shown: their own view, never the other role's tool
/// results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub task_id: String,
    pub mode: Mode,
    pub human_role: PlayerId,
    pub your_turn: bool,
    pub finished: bool,
    pub stop_reason: Option<StopReason>,
    pub autoplay: bool,
    pub view: PolicyView,
    /// Live status of each task assertion.
    pub criteria: Vec<CriterionResult>,
    /// Set once the session has finished.
    pub reward: Option<u8>,
    pub intervention: Option<InterventionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Events appended by this request, filtered to the human's view.
    pub events: Vec<Event>,
    pub state: SessionState,
}

struct Session<D: Domain> {
    human_role: PlayerId,
    sim: Simulation<D>,
    bot: Option<Box<dyn Policy>>,
    /// When false the scripted side only moves on an explicit `step_bot`.
    autoplay: bool,
    intervention: Option<InterventionRecord>,
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    info: SessionInfo,
    intervention: &'a Option<InterventionRecord>,
    events: &'a [Event],
}

pub struct SessionManager<D: Domain> {
    domain: Arc<D>,
    tasks: BTreeMap<String, CompositeTask>,
    config: RunConfig,
    sessions: BTreeMap<String, Session<D>>,
    next_id: u64,
    checkpoint_dir: Option<PathBuf>,
}

fn bot_for(task: &CompositeTask, human: PlayerId, mode: Mode) -> Option<Box<dyn Policy>> {
    match (human, mode) {
        (PlayerId::Agent, Mode::NoUser) => None,
        (PlayerId::Agent, _) => Some(Box::new(oracle_user(task))),
        (PlayerId::User, _) => Some(Box::new(oracle_agent(task))),
    }
}

impl<D: Domain> SessionManager<D> {
    pub fn new(domain: Arc<D>, tasks: Vec<CompositeTask>, config: RunConfig) -> Self {
        SessionManager {
            domain,
            tasks: tasks.into_iter().map(|t| (t.id.clone(), t)).collect(),
            config,
            sessions: BTreeMap::new(),
            next_id: 1,
            checkpoint_dir: None,
        }
    }

    /// Writes every session to `dir/<id>.json` after each change.
    pub fn with_checkpoints(mut self, dir: PathBuf) -> Self {
        self.checkpoint_dir = Some(dir);
        self
    }

    pub fn tasks(&self) -> impl Iterator<Item = &CompositeTask> {
        self.tasks.values()
    }

    pub fn task(&self, id: &str) -> Option<&CompositeTask> {
        self.tasks.get(id)
    }

    fn fresh_id(&mut self) -> String {
        let id = format!("s{:04}", self.next_id);
        self.next_id += 1;
        id
    }

    fn get(&self, id: &str) -> Result<&Session<D>, SessionError> {
        self.sessions.get(id).ok_or_else(|| SessionError::NotFound(id.into()))
    }

    pub fn start(&mut self, task_id: &str, mode: Mode, human_role: PlayerId) -> Result<SessionState, SessionError> {
        self.start_with(task_id, mode, human_role, true)
    }

    pub fn start_with(
        &mut self,
        task_id: &str,
        mode: Mode,
        human_role: PlayerId,
        autoplay: bool,
    ) -> Result<SessionState, SessionError> {
        if mode == Mode::NoUser && human_role == PlayerId::User {
            return Err(SessionError::Invalid("no_user mode has no user role to play".into()));
        }
        let task = self
            .tasks
            .get(task_id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownTask(task_id.into()))?;
        let config = RunConfig { mode, ..self.config.clone() };
        let sim = Simulation::new(Arc::clone(&self.domain), task.clone(), config, 0)?;
        let id = self.fresh_id();
        let mut session = Session {
            human_role,
            bot: bot_for(&task, human_role, mode),
            sim,
            autoplay,
            intervention: None,
        };
        pump(&mut session)?;
        self.sessions.insert(id.clone(), session);
        self.checkpoint(&id)?;
        self.state(&id)
    }

    pub fn state(&self, id: &str) -> Result<SessionState, SessionError> {
        let s = self.get(id)?;
        let task = s.sim.task();
        let criteria = check_env_assertions(s.sim.env(), &task.evaluation.env_assertions)
            .map_err(|e| SessionError::Invalid(e.to_string()))?;
        let reward = match s.sim.trajectory() {
            Ok(traj) => Some(
                compute_reward(task, &traj, s.sim.env(), None, EvalOptions::default())
                    .map_err(|e| SessionError::Invalid(e.to_string()))?
                    .reward,
            ),
            Err(_) => None,
        };
        Ok(SessionState {
            session_id: id.into(),
            task_id: task.id.clone(),
            mode: s.sim.config().mode,
            human_role: s.human_role,
            your_turn: s.sim.turn() == Some(s.human_role),
            finished: s.sim.stop_reason().is_some(),
            stop_reason: s.sim.stop_reason(),
            autoplay: s.autoplay,
            view: s.sim.view(s.human_role),
            criteria,
            reward,
            intervention: s.intervention.clone(),
        })
    }

    pub fn list(&self) -> Vec<SessionInfo> {
        self.sessions.iter().map(|(id, s)| info(id, s)).collect()
    }

    /// Applies the human's action, then lets the scripted side respond
    /// until control returns or the session ends.
    pub fn act(&mut self, id: &str, action: Action) -> Result<StepOutcome, SessionError> {
        let s = self.sessions.get_mut(id).ok_or_else(|| SessionError::NotFound(id.into()))?;
        if s.sim.stop_reason().is_some() {
            return Err(SessionError::Finished);
        }
        if s.sim.turn() != Some(s.human_role) {
            return Err(SessionError::NotYourTurn);
        }
        let before = s.sim.history().len();
        s.sim.submit(s.human_role, Ok(action))?;
        pump(s)?;
        let events = visible_history(s.human_role, &s.sim.history()[before..]);
        self.checkpoint(id)?;
        Ok(StepOutcome {
            events,
            state: self.state(id)?,
        })
    }

    /// Lets the scripted side take exactly one decision.
    pub fn step_bot(&mut self, id: &str) -> Result<StepOutcome, SessionError> {
        let s = self.sessions.get_mut(id).ok_or_else(|| SessionError::NotFound(id.into()))?;
        match s.sim.turn() {
            None => return Err(SessionError::Finished),
            Some(t) if t == s.human_role => return Err(SessionError::NotYourTurn),
            Some(_) => {}
        }
        let before = s.sim.history().len();
        let bot = s
            .bot
            .as_deref_mut()
            .ok_or_else(|| SessionError::Invalid("no scripted policy for the other role".into()))?;
        s.sim.advance(bot)?;
        let events = visible_history(s.human_role, &s.sim.history()[before..]);
        self.checkpoint(id)?;
        Ok(StepOutcome {
            events,
            state: self.state(id)?,
        })
    }

    /// Forks `id` at `event_index`: the new session keeps the parent's
    /// first `event_index` events, then applies `replacement` (if any) for
    /// whoever acted at that point.
    pub fn rewind(
        &mut self,
        id: &str,
        event_index: usize,
        replacement: Option<Action>,
        note: &str,
    ) -> Result<SessionState, SessionError> {
        let parent = self.get(id)?;
        let events = parent.sim.history();
        if event_index > events.len() {
            return Err(SessionError::Invalid(format!(
                "event index {event_index} beyond the {} recorded events",
                events.len()
            )));
        }
        let task = parent.sim.task().clone();
        let config = parent.sim.config().clone();
        let human_role = parent.human_role;
        let autoplay = parent.autoplay;
        let actor_at = events.get(event_index).map(|e| e.actor);
        let prefix = events[..event_index].to_vec();
        let mut sim = Simulation::resume(Arc::clone(&self.domain), task.clone(), config.clone(), 0, &prefix)
            .map_err(|e| SessionError::Invalid(format!("cannot rewind to {event_index}: {e}")))?;
        if let Some(action) = &replacement {
            let actor = actor_at.or(sim.turn()).ok_or(SessionError::Finished)?;
            sim.submit(actor, Ok(action.clone()))?;
        }
        let new_id = self.fresh_id();
        let mut session = Session {
            human_role,
            bot: bot_for(&task, human_role, config.mode),
            sim,
            autoplay,
            intervention: Some(InterventionRecord {
                session_id: new_id.clone(),
                parent_session_id: id.into(),
                event_index,
                replacement,
                note: note.into(),
            }),
        };
        pump(&mut session)?;
        self.sessions.insert(new_id.clone(), session);
        self.checkpoint(&new_id)?;
        self.state(&new_id)
    }

    /// Full event history of a session, for operators and export.
    pub fn events(&self, id: &str) -> Result<Vec<Event>, SessionError> {
        Ok(self.get(id)?.sim.history().to_vec())
    }

    fn checkpoint(&self, id: &str) -> Result<(), SessionError> {
        let Some(dir) = &self.checkpoint_dir else {
            return Ok(());
        };
        let s = self.get(id)?;
        fs::create_dir_all(dir).map_err(|e| SessionError::Checkpoint(e.to_string()))?;
        let doc = Checkpoint {
            info: info(id, s),
            intervention: &s.intervention,
            events: s.sim.history(),
        };
        let text = serde_json::to_string_pretty(&doc).expect("checkpoint serializes");
        fs::write(dir.join(format!("{id}.json")), text).map_err(|e| SessionError::Checkpoint(e.to_string()))
    }
}

fn info<D: Domain>(id: &str, s: &Session<D>) -> SessionInfo {
    SessionInfo {
        session_id: id.into(),
        task_id: s.sim.task().id.clone(),
        mode: s.sim.config().mode,
        human_role: s.human_role,
        parent_session_id: s.intervention.as_ref().map(|i| i.parent_session_id.clone()),
        finished: s.sim.stop_reason().is_some(),
        stop_reason: s.sim.stop_reason(),
        event_count: s.sim.history().len(),
    }
}

/// Runs the scripted side while it holds control.
fn pump<D: Domain>(s: &mut Session<D>) -> Result<(), SessionError> {
    if !s.autoplay {
        return Ok(());
    }
    while let Some(turn) = s.sim.turn() {
        if turn == s.human_role {
            break;
        }
        let bot = s
            .bot
            .as_deref_mut()
            .ok_or_else(|| SessionError::Invalid("no scripted policy for the other role".into()))?;
        s.sim.advance(bot)?;
    }
    Ok(())
}
