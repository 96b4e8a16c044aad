use std::collections::BTreeMap;
use std::fs;
use std::sync::OnceLock;

use duet_core::evaluation::{compute_reward, EvalOptions, ReplayError};
use duet_core::orchestrator::{run_suite, Mode, PolicyPair, RunConfig, StopReason};
use duet_core::policies::{oracle_agent, oracle_user};
use duet_core::store::{
    evaluate_run, parse_trajectory, parse_trajectory_lenient, persist_run, read_trajectory, trajectory_to_jsonl, RunDir, RunError, RunManifest,
    SessionError, SessionManager, Store, StoreError,
};
use duet_core::tasks::CompositeTask;
use duet_core::telecom::catalog::catalog;
use duet_core::telecom::Telecom;
use duet_core::world::{Action, Observation, PlayerId};

const NO_SERVICE_ID: &str = "[service_issue]airplane_mode_on|unseat_sim_card";

fn all_tasks() -> &'static [CompositeTask] {
    static TASKS: OnceLock<Vec<CompositeTask>> = OnceLock::new();
    TASKS.get_or_init(|| catalog().compose(None).unwrap())
}

fn task(id: &str) -> CompositeTask {
    all_tasks().iter().find(|t| t.id == id).expect(id).clone()
}

fn few_tasks() -> Vec<CompositeTask> {
    vec![
        task(NO_SERVICE_ID),
        task("[service_issue]airplane_mode_on|billing_dispute_transfer"),
        all_tasks().iter().find(|t| t.n_actions() >= 4).unwrap().clone(),
    ]
}

fn oracle_pair(t: &CompositeTask, _trial: usize, _seed: u64) -> PolicyPair {
    PolicyPair {
        agent: Box::new(oracle_agent(t)),
        user: Some(Box::new(oracle_user(t))),
    }
}

fn manifest(config: &RunConfig, tasks: &[CompositeTask], run_id: &str) -> RunManifest {
    let mut policies = BTreeMap::new();
    policies.insert("agent".to_string(), "oracle".to_string());
    policies.insert("user".to_string(), "oracle".to_string());
    let mut m = RunManifest::new(config, "telecom", &Telecom::fixture_digest(), policies, tasks);
    m.run_id = run_id.into();
    m
}

fn stored_run(root: &std::path::Path, run_id: &str) -> RunDir {
    let tasks = few_tasks();
    let config = RunConfig {
        trials_per_task: 2,
        seed: 7,
        ..RunConfig::default()
    };
    let results = run_suite(Telecom::shared(), &tasks, &oracle_pair, &config).unwrap();
    persist_run(&Store::new(root), &manifest(&config, &tasks, run_id), &tasks, &results).unwrap()
}

#[test]
fn trajectory_round_trip_preserves_events_and_reward() {
    let tasks = few_tasks();
    let config = RunConfig::default();
    for (traj, env) in run_suite(Telecom::shared(), &tasks, &oracle_pair, &config).unwrap() {
        let text = trajectory_to_jsonl(&traj);
        let back = parse_trajectory(&text, std::path::Path::new("mem")).unwrap();
        assert_eq!(back, traj);
        assert_eq!(back.digest(), traj.digest());
        let t = tasks.iter().find(|t| t.id == traj.task_id).unwrap();
        let a = compute_reward(t, &traj, &env, None, EvalOptions::default()).unwrap();
        let b = compute_reward(t, &back, &env, None, EvalOptions::default()).unwrap();
        assert_eq!(a.reward, b.reward);
        assert_eq!(a.reward, 1);
    }
}

#[test]
fn trajectory_lines_carry_header_then_events() {
    let t = task(NO_SERVICE_ID);
    let config = RunConfig::default();
    let (traj, _) = run_suite(Telecom::shared(), std::slice::from_ref(&t), &oracle_pair, &config)
        .unwrap()
        .remove(0);
    let text = trajectory_to_jsonl(&traj);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), traj.events.len() + 1);
    let header: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(header["manifest"], "../manifest.json");
    assert_eq!(header["task_id"], NO_SERVICE_ID);
    assert_eq!(header["event_count"], traj.events.len());
    for (i, line) in lines[1..].iter().enumerate() {
        let ev: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(ev["index"], i);
        assert!(ev.get("actor").is_some());
    }
}

#[test]
fn parse_rejects_truncated_and_reordered_files() {
    let t = task(NO_SERVICE_ID);
    let (traj, _) = run_suite(Telecom::shared(), std::slice::from_ref(&t), &oracle_pair, &RunConfig::default())
        .unwrap()
        .remove(0);
    let text = trajectory_to_jsonl(&traj);
    let mut lines: Vec<&str> = text.lines().collect();
    let truncated = lines[..lines.len() - 1].join("\n");
    assert!(matches!(
        parse_trajectory(&truncated, std::path::Path::new("x")),
        Err(StoreError::Parse { .. })
    ));
    lines.swap(1, 2);
    assert!(matches!(
        parse_trajectory(&lines.join("\n"), std::path::Path::new("x")),
        Err(StoreError::Parse { .. })
    ));
    assert!(parse_trajectory("", std::path::Path::new("x")).is_err());
}

#[test]
fn stored_run_evaluates_to_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let run = stored_run(dir.path(), "r1");
    assert_eq!(run.trajectory_files().unwrap().len(), 6);
    let (records, summary) = evaluate_run(Telecom::shared(), &run, None, EvalOptions::default()).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.reward == 1));
    assert_eq!(summary.mean_reward, 1.0);
    assert_eq!(summary.pass_k.values, vec![1.0, 1.0]);
    assert_eq!(run.read_results().unwrap(), records);
    assert_eq!(run.read_summary().unwrap(), summary);
    let csv = fs::read_to_string(run.path.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("task_id,trial,reward,stop_reason"));
}

#[test]
fn reloaded_trajectories_equal_the_originals() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = few_tasks();
    let config = RunConfig::default();
    let results = run_suite(Telecom::shared(), &tasks, &oracle_pair, &config).unwrap();
    let run = persist_run(&Store::new(dir.path()), &manifest(&config, &tasks, "r"), &tasks, &results).unwrap();
    let mut loaded = run.load_trajectories().unwrap();
    let mut original: Vec<_> = results.into_iter().map(|(t, _)| t).collect();
    loaded.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    original.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    assert_eq!(loaded, original);
    assert_eq!(run.tasks().unwrap(), tasks);
}

#[test]
fn tampered_observation_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let run = stored_run(dir.path(), "r1");
    let file = run.trajectory_files().unwrap().remove(0);
    let mut traj = read_trajectory(&file).unwrap();
    let pos = traj
        .events
        .iter()
        .position(|e| e.tool_call().is_some())
        .expect("a tool call");
    traj.events[pos].observation = Some(Observation::ok("forged"));
    fs::write(&file, trajectory_to_jsonl(&traj)).unwrap();
    let err = evaluate_run(Telecom::shared(), &run, None, EvalOptions::default()).unwrap_err();
    assert!(matches!(err, RunError::Replay { source: ReplayError::Sim(_), .. }), "{err}");
}

#[test]
fn tampered_final_hash_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let run = stored_run(dir.path(), "r1");
    let file = run.trajectory_files().unwrap().remove(0);
    let mut traj = read_trajectory(&file).unwrap();
    traj.final_world_hashes.user = "0".repeat(64);
    fs::write(&file, trajectory_to_jsonl(&traj)).unwrap();
    let err = evaluate_run(Telecom::shared(), &run, None, EvalOptions::default()).unwrap_err();
    assert!(
        matches!(err, RunError::Replay { source: ReplayError::HashMismatch { db: "user", .. }, .. }),
        "{err}"
    );
}

#[test]
fn runs_are_exclusive_and_listed() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    stored_run(dir.path(), "a");
    stored_run(dir.path(), "b");
    let tasks = few_tasks();
    let again = store.create_run(&manifest(&RunConfig::default(), &tasks, "a"), &tasks);
    assert!(matches!(again, Err(StoreError::Exists(_))));
    let ids: Vec<String> = store.list_runs().unwrap().into_iter().map(|m| m.run_id).collect();
    assert_eq!(ids, ["a", "b"]);
    assert!(matches!(store.open_run("../a"), Err(StoreError::NotFound(_))));
    assert!(matches!(store.open_run("zzz"), Err(StoreError::NotFound(_))));
    let run = store.open_run("a").unwrap();
    assert!(run.trajectory_path("../manifest.json").is_err());
    let name = RunDir::trajectory_name(0, 1);
    assert_eq!(name, "0000_t1.jsonl");
    assert!(run.trajectory_path(&name).is_ok());
}

#[test]
fn trajectory_files_are_never_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let run = stored_run(dir.path(), "r");
    let traj = read_trajectory(&run.trajectory_path("0000_t0.jsonl").unwrap()).unwrap();
    assert!(matches!(run.write_trajectory(0, &traj), Err(StoreError::Io { .. })));
}

#[test]
fn manifest_records_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let run = stored_run(dir.path(), "m");
    let m = &run.manifest;
    assert_eq!(m.config.seed, 7);
    assert_eq!(m.config.trials_per_task, 2);
    assert_eq!(m.mode, Mode::Default);
    assert_eq!(m.task_count, 3);
    assert_eq!(m.fixture_digest, Telecom::fixture_digest());
    assert_eq!(m.policies["agent"], "oracle");
    assert!(m.code_version.starts_with("duet-core "));
    let reread: RunManifest =
        serde_json::from_str(&fs::read_to_string(run.path.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(&reread, m);
}

fn sessions() -> SessionManager<Telecom> {
    SessionManager::new(Telecom::shared(), all_tasks().to_vec(), RunConfig::default())
}

fn backticked(text: &str) -> Option<&str> {
    let start = text.find('`')? + 1;
    let len = text[start..].find('`')?;
    Some(&text[start..start + len])
}

#[test]
fn human_user_solves_no_service_against_oracle_agent() {
    let t = task(NO_SERVICE_ID);
    let mut mgr = sessions();
    let state = mgr.start(NO_SERVICE_ID, Mode::Default, PlayerId::User).unwrap();
    let id = state.session_id.clone();
    assert!(state.your_turn);
    assert_eq!(state.view.role, PlayerId::User);
    assert!(state.criteria.iter().any(|c| !c.passed));
    let opening = t.user_scenario.instructions.reason_for_call.clone();
    let mut state = mgr.act(&id, Action::message(opening)).unwrap().state;
    let mut calls = Vec::new();
    for _ in 0..10 {
        if state.finished {
            break;
        }
        let last = state.view.last_incoming_message().map(|(_, m)| m.to_string()).unwrap_or_default();
        match backticked(&last) {
            Some(name) => {
                let expected = t.expected_actions().iter().find(|a| a.name == name).unwrap();
                calls.push(name.to_string());
                mgr.act(&id, Action::tool(expected.to_call())).unwrap();
                state = mgr.act(&id, Action::message(format!("Done, I ran {name}."))).unwrap().state;
            }
            None => state = mgr.act(&id, Action::message("Great, thanks. ###STOP###")).unwrap().state,
        }
    }
    assert_eq!(calls, ["toggle_airplane_mode", "reseat_sim_card"]);
    assert!(state.finished);
    assert_eq!(state.stop_reason, Some(StopReason::UserStop));
    assert_eq!(state.reward, Some(1));
    assert!(state.criteria.iter().all(|c| c.passed));
    let err = mgr.act(&id, Action::message("hello?")).unwrap_err();
    assert!(matches!(err, SessionError::Finished));
}

#[test]
fn human_view_hides_the_other_roles_tool_results() {
    let mut mgr = sessions();
    let state = mgr.start(NO_SERVICE_ID, Mode::Default, PlayerId::Agent).unwrap();
    let id = state.session_id;
    mgr.act(&id, Action::message("Hi! How can I help you today?")).unwrap();
    mgr.act(&id, Action::message("Please run `check_status_bar` on your phone.")).unwrap();
    let full = mgr.events(&id).unwrap();
    assert!(full.iter().any(|e| e.actor == PlayerId::User && e.tool_call().is_some()));
    let state = mgr.state(&id).unwrap();
    assert!(state
        .view
        .visible_history
        .iter()
        .all(|e| e.actor == PlayerId::Agent || e.message().is_some()));
    assert!(state.view.visible_history.len() < full.len());
}

#[test]
fn acting_while_the_bot_holds_control_is_rejected() {
    let mut mgr = sessions();
    let state = mgr.start_with(NO_SERVICE_ID, Mode::Default, PlayerId::User, false).unwrap();
    // The greeting is part of the protocol, so the user speaks first.
    assert!(state.your_turn);
    let id = state.session_id;
    let out = mgr.act(&id, Action::message("my phone has no signal")).unwrap();
    assert_eq!(out.events.len(), 1);
    assert!(!out.state.your_turn);
    let err = mgr.act(&id, Action::message("hello")).unwrap_err();
    assert!(matches!(err, SessionError::NotYourTurn));
    assert_eq!(err.to_string(), "not your turn");
    let step = mgr.step_bot(&id).unwrap();
    assert_eq!(step.events[0].actor, PlayerId::Agent);
    assert_eq!(step.events.len(), 1);
    assert!(step.state.your_turn);
    assert!(matches!(mgr.step_bot(&id), Err(SessionError::NotYourTurn)));
    mgr.act(&id, Action::message("ok")).unwrap();
}

#[test]
fn unknown_session_and_task_are_not_found() {
    let mut mgr = sessions();
    assert!(matches!(mgr.state("nope"), Err(SessionError::NotFound(_))));
    assert!(matches!(
        mgr.act("nope", Action::message("x")),
        Err(SessionError::NotFound(_))
    ));
    assert!(matches!(
        mgr.start("[service_issue]nothing", Mode::Default, PlayerId::User),
        Err(SessionError::UnknownTask(_))
    ));
    assert!(matches!(
        mgr.start(NO_SERVICE_ID, Mode::NoUser, PlayerId::User),
        Err(SessionError::Invalid(_))
    ));
}

#[test]
fn human_agent_in_no_user_mode_works_alone() {
    let t = task(NO_SERVICE_ID);
    let mut mgr = sessions();
    let state = mgr.start(NO_SERVICE_ID, Mode::NoUser, PlayerId::Agent).unwrap();
    let id = state.session_id;
    assert!(state.your_turn);
    assert!(state.view.tool_specs.iter().any(|s| s.name == "toggle_airplane_mode"));
    for a in t.expected_actions() {
        let out = mgr.act(&id, Action::tool(a.to_call())).unwrap();
        assert!(out.state.your_turn);
    }
    let state = mgr.act(&id, Action::message("All fixed. ###STOP###")).unwrap().state;
    assert_eq!(state.stop_reason, Some(StopReason::AgentStop));
    assert_eq!(state.reward, Some(1));
}

#[test]
fn rewind_forks_without_touching_the_parent() {
    let dir = tempfile::tempdir().unwrap();
    let mut mgr = sessions().with_checkpoints(dir.path().to_path_buf());
    let state = mgr.start(NO_SERVICE_ID, Mode::Default, PlayerId::User).unwrap();
    let parent = state.session_id;
    mgr.act(&parent, Action::message("My phone shows no service.")).unwrap();
    mgr.act(&parent, Action::message("Which setting should I look at?")).unwrap();
    let before = mgr.events(&parent).unwrap();
    assert!(before.len() > 4);
    assert_eq!(before[4].actor, PlayerId::Agent);

    let replacement = Action::message("Could you restart your phone first?");
    let fork = mgr
        .rewind(&parent, 4, Some(replacement.clone()), "agent skipped a step")
        .unwrap();
    let child = fork.session_id.clone();
    assert_ne!(child, parent);
    let rec = fork.intervention.clone().unwrap();
    assert_eq!(rec.parent_session_id, parent);
    assert_eq!(rec.event_index, 4);
    assert_eq!(rec.replacement.as_ref(), Some(&replacement));

    let after = mgr.events(&child).unwrap();
    assert_eq!(after[..4], before[..4]);
    assert_eq!(after[4].action(), Some(&replacement));
    assert!(fork.your_turn);
    assert_eq!(mgr.events(&parent).unwrap(), before);

    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(files.len(), 2);
    let infos = mgr.list();
    assert_eq!(infos.len(), 2);
    assert_eq!(infos[1].parent_session_id.as_deref(), Some(parent.as_str()));

    let checkpoint: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join(format!("{child}.json"))).unwrap()).unwrap();
    assert_eq!(checkpoint["intervention"]["note"], "agent skipped a step");
    assert_eq!(checkpoint["events"].as_array().unwrap().len(), after.len());

    assert!(matches!(
        mgr.rewind(&parent, 999, None, ""),
        Err(SessionError::Invalid(_))
    ));
}

#[test]
fn rewind_without_replacement_replays_the_prefix() {
    let mut mgr = sessions();
    let parent = mgr.start(NO_SERVICE_ID, Mode::Default, PlayerId::User).unwrap().session_id;
    mgr.act(&parent, Action::message("No service on my phone.")).unwrap();
    let fork = mgr.rewind(&parent, 1, None, "retry").unwrap();
    assert!(fork.your_turn);
    assert_eq!(mgr.events(&fork.session_id).unwrap().len(), 1);
}

#[test]
fn lenient_parse_skips_bad_lines() {
    let t = task(NO_SERVICE_ID);
    let (traj, _) = run_suite(Telecom::shared(), std::slice::from_ref(&t), &oracle_pair, &RunConfig::default())
        .unwrap()
        .remove(0);
    let text = trajectory_to_jsonl(&traj);
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[3] = "{not json".into();
    let doc = parse_trajectory_lenient(&lines.join("\n"));
    assert!(doc.header.is_some());
    assert_eq!(doc.events.len(), traj.events.len() - 1);
    assert_eq!(doc.errors.len(), 1);
    assert_eq!(doc.errors[0].line, 4);
    let empty = parse_trajectory_lenient("");
    assert!(empty.header.is_none());
    assert_eq!(empty.errors.len(), 1);
}
