use std::sync::{Arc, OnceLock};

use duet_core::evaluation::{check_actions, compute_reward, EvalOptions};
use duet_core::orchestrator::{
    build_view, run_simulation, run_trials, GoalProbe, Mode, Policy, PolicyError, PolicyPair, PolicyView, RunConfig,
    SimError, Simulation, StopReason, GREETING,
};
use duet_core::policies::{compliance_user, noisy_user, null_agent, oracle_agent, oracle_user};
use duet_core::tasks::{CompositeTask, Intent};
use duet_core::telecom::catalog::catalog;
use duet_core::telecom::Telecom;
use duet_core::world::{Action, Observation, PlayerId, ToolCall};

const NO_SERVICE_ID: &str = "[service_issue]airplane_mode_on|unseat_sim_card";

fn all_tasks() -> &'static [CompositeTask] {
    static TASKS: OnceLock<Vec<CompositeTask>> = OnceLock::new();
    TASKS.get_or_init(|| catalog().compose(None).unwrap())
}

fn task(id: &str) -> CompositeTask {
    all_tasks().iter().find(|t| t.id == id).expect(id).clone()
}

fn transfer_task() -> CompositeTask {
    task("[service_issue]airplane_mode_on|billing_dispute_transfer")
}

fn run_pair(t: &CompositeTask, mode: Mode) -> (duet_core::orchestrator::Trajectory, duet_core::env::Environment<Telecom>) {
    let config = RunConfig { mode, ..RunConfig::default() };
    let mut agent = oracle_agent(t);
    let mut user = oracle_user(t);
    run_simulation(Telecom::shared(), t, &mut agent, Some(&mut user), &config, 0).unwrap()
}

#[test]
fn no_service_oracle_pair_stops_with_reward_one() {
    let t = task(NO_SERVICE_ID);
    let (traj, env) = run_pair(&t, Mode::Default);
    assert_eq!(traj.stop_reason, StopReason::UserStop);
    assert_eq!(traj.events[0].message(), Some(GREETING));
    assert_eq!(traj.events[0].actor, PlayerId::Agent);
    let user_calls: Vec<&str> = traj
        .events
        .iter()
        .filter(|e| e.actor == PlayerId::User)
        .filter_map(|e| e.tool_call())
        .map(|c| c.name.as_str())
        .collect();
    assert_eq!(user_calls, ["toggle_airplane_mode", "reseat_sim_card"]);
    let record = compute_reward(&t, &traj, &env, None, EvalOptions::default()).unwrap();
    assert_eq!(record.reward, 1);
    assert!(check_actions(&traj.events, t.expected_actions(), Mode::Default).passed);
}

#[test]
fn control_passes_only_on_messages() {
    let t = task(NO_SERVICE_ID);
    let (traj, _) = run_pair(&t, Mode::Default);
    let mut holder = PlayerId::Agent;
    for e in &traj.events {
        assert_eq!(e.actor, holder, "event {} acted out of turn", e.index);
        if e.message().is_some() {
            holder = holder.other();
        }
    }
}

#[test]
fn max_steps_one() {
    let t = task(NO_SERVICE_ID);
    let config = RunConfig { max_steps: 1, ..RunConfig::default() };
    let mut agent = oracle_agent(&t);
    let mut user = oracle_user(&t);
    let (traj, _) = run_simulation(Telecom::shared(), &t, &mut agent, Some(&mut user), &config, 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::MaxSteps);
    assert_eq!(traj.events.len(), 1);
}

struct Says(&'static str);

impl Policy for Says {
    fn id(&self) -> String {
        "says".into()
    }

    fn decide(&mut self, _view: &PolicyView, _probe: &dyn GoalProbe) -> Result<Action, PolicyError> {
        Ok(Action::message(self.0))
    }
}

struct Garbage;

impl Policy for Garbage {
    fn id(&self) -> String {
        "garbage".into()
    }

    fn decide(&mut self, _view: &PolicyView, _probe: &dyn GoalProbe) -> Result<Action, PolicyError> {
        Err(PolicyError::new("{not json", "unparsable output"))
    }
}

#[test]
fn user_transfer_token_ends_run() {
    let t = task(NO_SERVICE_ID);
    let mut agent = null_agent();
    let mut user = Says("I want a human. ###TRANSFER###");
    let (traj, _) =
        run_simulation(Telecom::shared(), &t, &mut agent, Some(&mut user), &RunConfig::default(), 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::UserTransfer);
    assert_eq!(traj.events.len(), 2);
    // the message carrying the token is still recorded
    assert!(traj.events[1].message().unwrap().contains("###TRANSFER###"));
}

#[test]
fn both_tokens_mean_transfer() {
    let t = task(NO_SERVICE_ID);
    let mut user = Says("bye ###STOP### ###TRANSFER###");
    let (traj, _) =
        run_simulation(Telecom::shared(), &t, &mut null_agent(), Some(&mut user), &RunConfig::default(), 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::UserTransfer);
}

#[test]
fn unparsable_output_hits_error_limit() {
    let t = task(NO_SERVICE_ID);
    let mut user = Garbage;
    let (traj, env) =
        run_simulation(Telecom::shared(), &t, &mut null_agent(), Some(&mut user), &RunConfig::default(), 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::ErrorLimit);
    // greeting + three rejected outputs, each answered with an error observation
    assert_eq!(traj.events.len(), 4);
    for e in &traj.events[1..] {
        assert!(e.observation.as_ref().unwrap().is_error());
        assert!(e.observation.as_ref().unwrap().text().starts_with("invalid output"));
    }
    let record = compute_reward(&t, &traj, &env, None, EvalOptions::default()).unwrap();
    assert_eq!(record.reward, 0);
}

#[test]
fn failed_tool_calls_count_as_errors() {
    struct BadTool;
    impl Policy for BadTool {
        fn id(&self) -> String {
            "bad".into()
        }
        fn decide(&mut self, _v: &PolicyView, _p: &dyn GoalProbe) -> Result<Action, PolicyError> {
            Ok(Action::tool(ToolCall::new("no_such_tool")))
        }
    }
    let t = task(NO_SERVICE_ID);
    let config = RunConfig { mode: Mode::NoUser, ..RunConfig::default() };
    let (traj, _) = run_simulation(Telecom::shared(), &t, &mut BadTool, None, &config, 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::ErrorLimit);
    assert_eq!(traj.events.len(), 3);
}

#[test]
fn default_mode_requires_user_policy() {
    let t = task(NO_SERVICE_ID);
    let r = run_simulation(Telecom::shared(), &t, &mut null_agent(), None, &RunConfig::default(), 0);
    assert!(matches!(r, Err(SimError::Config(_))));
}

#[test]
fn no_user_mode_oracle_solo() {
    let t = task(NO_SERVICE_ID);
    let config = RunConfig { mode: Mode::NoUser, ..RunConfig::default() };
    let mut agent = oracle_agent(&t);
    let (traj, env) = run_simulation(Telecom::shared(), &t, &mut agent, None, &config, 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::AgentStop);
    assert!(traj.events.iter().all(|e| e.actor == PlayerId::Agent));
    assert_eq!(compute_reward(&t, &traj, &env, None, EvalOptions::default()).unwrap().reward, 1);
    assert!(check_actions(&traj.events, t.expected_actions(), Mode::NoUser).passed);
}

#[test]
fn views_per_mode() {
    let t = task(NO_SERVICE_ID);
    let mut sim = Simulation::new(Telecom::shared(), t.clone(), RunConfig::default(), 0).unwrap();
    let agent = sim.view(PlayerId::Agent);
    assert!(agent.instructions.starts_with("<instructions>\nYou are a customer service agent"));
    assert!(!agent.instructions.contains("unable to make or receive calls"));
    assert!(agent.tool_specs.iter().all(|s| s.owner == PlayerId::Agent));
    assert_eq!(agent.tool_specs.len(), 13);

    let user = sim.view(PlayerId::User);
    assert!(user.instructions.contains("Reason for call:"));
    assert_eq!(user.tool_specs.len(), 30);

    // a user tool result never reaches the agent
    sim.submit(PlayerId::User, Ok(Action::tool(ToolCall::new("check_status_bar")))).unwrap();
    let agent = sim.view(PlayerId::Agent);
    assert!(agent.visible_history.iter().all(|e| e.actor == PlayerId::Agent || e.message().is_some()));
    assert_eq!(sim.view(PlayerId::User).visible_history.len(), 2);

    let solo = Simulation::new(
        Telecom::shared(),
        t.clone(),
        RunConfig { mode: Mode::NoUser, ..RunConfig::default() },
        0,
    )
    .unwrap();
    let v = solo.view(PlayerId::Agent);
    assert!(v.instructions.contains("unable to make or receive calls"));
    assert_eq!(v.tool_specs.len(), 43);
    assert!(solo.history().is_empty());

    let gt = Simulation::new(
        Telecom::shared(),
        t.clone(),
        RunConfig { mode: Mode::GroundTruth, ..RunConfig::default() },
        0,
    )
    .unwrap();
    let v = build_view(gt.env(), PlayerId::Agent, &t, Mode::GroundTruth);
    assert!(v.instructions.contains("1. user calls toggle_airplane_mode with arguments {}"));
    assert!(v.instructions.contains("2. user calls reseat_sim_card with arguments {}"));
    let steps = v.instructions.split("## Resolution steps").nth(1).unwrap();
    let listed = steps.lines().filter(|l| l.chars().next().is_some_and(|c| c.is_ascii_digit())).count();
    assert_eq!(listed, 2);
}

#[test]
fn out_of_turn_rejected() {
    let t = task(NO_SERVICE_ID);
    let mut sim = Simulation::new(Telecom::shared(), t, RunConfig::default(), 0).unwrap();
    let before = sim.history().len();
    let r = sim.submit(PlayerId::Agent, Ok(Action::message("hello again")));
    assert!(matches!(r, Err(SimError::NotYourTurn)));
    assert_eq!(sim.history().len(), before);
}

#[test]
fn transfer_task_with_oracles() {
    let t = transfer_task();
    assert!(t.requires_transfer());
    let (traj, env) = run_pair(&t, Mode::Default);
    assert_eq!(traj.stop_reason, StopReason::UserTransfer);
    assert!(traj
        .events
        .iter()
        .any(|e| e.actor == PlayerId::Agent && e.tool_call().is_some_and(|c| c.name == "transfer_to_human")));
    assert_eq!(compute_reward(&t, &traj, &env, None, EvalOptions::default()).unwrap().reward, 1);
}

#[test]
fn agent_only_solution_means_no_user_tools() {
    let t = task("[service_issue]line_suspended");
    let (traj, env) = run_pair(&t, Mode::Default);
    assert!(!traj.events.iter().any(|e| e.actor == PlayerId::User && e.tool_call().is_some()));
    assert_eq!(traj.stop_reason, StopReason::UserStop);
    assert_eq!(compute_reward(&t, &traj, &env, None, EvalOptions::default()).unwrap().reward, 1);
}

#[test]
fn null_agent_leaves_world_alone() {
    let t = task(NO_SERVICE_ID);
    let mut user = oracle_user(&t);
    let (traj, env) =
        run_simulation(Telecom::shared(), &t, &mut null_agent(), Some(&mut user), &RunConfig::default(), 0).unwrap();
    assert!(matches!(traj.stop_reason, StopReason::UserStop | StopReason::MaxSteps));
    assert_eq!(traj.final_world_hashes, traj.initial_world_hashes);
    let record = compute_reward(&t, &traj, &env, None, EvalOptions::default()).unwrap();
    assert_eq!(record.reward, 0);
    assert!(record.criteria.iter().any(|c| !c.passed && c.detail.contains("expected true, got false")));
}

#[test]
fn null_agent_solo_runs_to_max_steps() {
    let t = task(NO_SERVICE_ID);
    let config = RunConfig { mode: Mode::NoUser, max_steps: 25, ..RunConfig::default() };
    let (traj, _) = run_simulation(Telecom::shared(), &t, &mut null_agent(), None, &config, 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::MaxSteps);
    assert_eq!(traj.events.len(), 25);
}

#[test]
fn unknown_user_tool_gets_clarification() {
    struct AsksForMagic;
    impl Policy for AsksForMagic {
        fn id(&self) -> String {
            "magic".into()
        }
        fn decide(&mut self, _v: &PolicyView, _p: &dyn GoalProbe) -> Result<Action, PolicyError> {
            Ok(Action::message("Please run `fix_everything` on your phone."))
        }
    }
    let t = task(NO_SERVICE_ID);
    let mut user = oracle_user(&t);
    let config = RunConfig { max_steps: 6, ..RunConfig::default() };
    let (traj, _) = run_simulation(Telecom::shared(), &t, &mut AsksForMagic, Some(&mut user), &config, 0).unwrap();
    let replies: Vec<&str> = traj
        .events
        .iter()
        .filter(|e| e.actor == PlayerId::User)
        .filter_map(|e| e.message())
        .collect();
    assert!(replies[1..].iter().all(|m| m.contains("`fix_everything`")), "{replies:?}");
}

#[test]
fn compliance_user_runs_off_script_tools() {
    struct AsksVpn;
    impl Policy for AsksVpn {
        fn id(&self) -> String {
            "vpn".into()
        }
        fn decide(&mut self, _v: &PolicyView, _p: &dyn GoalProbe) -> Result<Action, PolicyError> {
            Ok(Action::message("Please run `connect_wifi` with {\"network_name\": \"CafeNet\"} on your phone."))
        }
    }
    let t = task(NO_SERVICE_ID);
    let mut user = compliance_user(&t);
    let config = RunConfig { max_steps: 4, ..RunConfig::default() };
    let (traj, _) = run_simulation(Telecom::shared(), &t, &mut AsksVpn, Some(&mut user), &config, 0).unwrap();
    let call = traj.events.iter().find_map(|e| e.tool_call()).expect("user called a tool");
    assert_eq!(call.name, "connect_wifi");
    assert_eq!(call.args["network_name"], "CafeNet");
}

fn oracle_factory(t: &CompositeTask, _trial: usize, _seed: u64) -> PolicyPair {
    PolicyPair {
        agent: Box::new(oracle_agent(t)),
        user: Some(Box::new(oracle_user(t))),
    }
}

#[test]
fn deterministic_trials_are_identical() {
    let t = task("[mms_issue]airplane_mode_on|mobile_data_off|bad_apn_mms_settings|sms_permission_revoked");
    let config = RunConfig { trials_per_task: 4, ..RunConfig::default() };
    let runs = run_trials(Telecom::shared(), &t, &oracle_factory, &config).unwrap();
    assert_eq!(runs.len(), 4);
    let digests: Vec<String> = runs.iter().map(|(tr, _)| tr.digest()).collect();
    assert!(digests.iter().all(|d| *d == digests[0]));
    assert_eq!(runs.iter().map(|(tr, _)| tr.trial_index).collect::<Vec<_>>(), [0, 1, 2, 3]);
}

#[test]
fn zero_trials_is_a_config_error() {
    let t = task(NO_SERVICE_ID);
    let config = RunConfig { trials_per_task: 0, ..RunConfig::default() };
    assert!(matches!(
        run_trials(Telecom::shared(), &t, &oracle_factory, &config),
        Err(SimError::Config(_))
    ));
}

fn noisy_factory(t: &CompositeTask, _trial: usize, seed: u64) -> PolicyPair {
    PolicyPair {
        agent: Box::new(oracle_agent(t)),
        user: Some(Box::new(noisy_user(t, seed, 0.5))),
    }
}

#[test]
fn seeded_noise_reproducible_per_trial() {
    let t = task("[mobile_data_issue]airplane_mode_on|mobile_data_off|data_saver_on|vpn_connected");
    let config = RunConfig { trials_per_task: 4, seed: 11, ..RunConfig::default() };
    let a = run_trials(Telecom::shared(), &t, &noisy_factory, &config).unwrap();
    let b = run_trials(Telecom::shared(), &t, &noisy_factory, &config).unwrap();
    for ((x, _), (y, _)) in a.iter().zip(&b) {
        assert_eq!(x.digest(), y.digest());
        assert_eq!(x.stop_reason, StopReason::UserStop);
    }
    let distinct: std::collections::BTreeSet<String> = a.iter().map(|(x, _)| x.digest()).collect();
    assert!(distinct.len() > 1, "different trial seeds should hesitate differently");
}

#[test]
fn resume_reproduces_and_detects_tampering() {
    let t = task(NO_SERVICE_ID);
    let (traj, _) = run_pair(&t, Mode::Default);
    let sim = Simulation::resume(Telecom::shared(), t.clone(), RunConfig::default(), 0, &traj.events).unwrap();
    assert_eq!(sim.stop_reason(), Some(StopReason::UserStop));
    let mut tampered = traj.events.clone();
    let i = tampered.iter().position(|e| e.tool_call().is_some()).unwrap();
    tampered[i].observation = Some(Observation::ok("Airplane Mode is now ON."));
    assert!(matches!(
        Simulation::resume(Telecom::shared(), t, RunConfig::default(), 0, &tampered),
        Err(SimError::Diverged { .. })
    ));
}

#[test]
fn every_intent_has_oracle_success_sample() {
    for intent in Intent::ALL {
        let t = all_tasks().iter().rfind(|t| t.intent() == intent).unwrap();
        let (traj, env) = run_pair(t, Mode::Default);
        let r = compute_reward(t, &traj, &env, None, EvalOptions::default()).unwrap();
        assert_eq!(r.reward, 1, "{} stopped with {}", t.id, traj.stop_reason);
    }
}

#[test]
fn decision_timeout_becomes_error() {
    struct Slow;
    impl Policy for Slow {
        fn id(&self) -> String {
            "slow".into()
        }
        fn decide(&mut self, _v: &PolicyView, _p: &dyn GoalProbe) -> Result<Action, PolicyError> {
            std::thread::sleep(std::time::Duration::from_millis(20));
            Ok(Action::message("hello"))
        }
    }
    let t = task(NO_SERVICE_ID);
    let config = RunConfig { decision_timeout_ms: Some(1), ..RunConfig::default() };
    let (traj, _) =
        run_simulation(Arc::new(Telecom::new()), &t, &mut null_agent(), Some(&mut Slow), &config, 0).unwrap();
    assert_eq!(traj.stop_reason, StopReason::ErrorLimit);
    assert!(traj.events[1].observation.as_ref().unwrap().text().contains("timed out"));
}
