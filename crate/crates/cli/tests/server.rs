use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use duet_cli::commands;
use duet_cli::config::Config;
use duet_cli::server::{router, AppState, SessionUpdate};
use duet_core::orchestrator::RunConfig;
use duet_core::store::SessionState;
use duet_core::tasks::io::write_tasks;
use duet_core::tasks::CompositeTask;
use duet_core::telecom::catalog::catalog;
use duet_core::world::Action;

const NO_SERVICE_ID: &str = "[service_issue]airplane_mode_on|unseat_sim_card";

fn tasks() -> Vec<CompositeTask> {
    static TASKS: OnceLock<Vec<CompositeTask>> = OnceLock::new();
    TASKS
        .get_or_init(|| {
            let all = catalog().compose(None).unwrap();
            let mut picked: Vec<_> = all.iter().filter(|t| t.id == NO_SERVICE_ID).cloned().collect();
            picked.extend(all.iter().filter(|t| t.id.starts_with("[mms_issue]")).take(2).cloned());
            picked
        })
        .clone()
}

fn app(root: &std::path::Path) -> Router {
    router(Arc::new(AppState::new(root.to_path_buf(), tasks(), RunConfig::default())))
}

fn encode(segment: &str) -> String {
    segment
        .chars()
        .map(|c| match c {
            '[' => "%5B".to_string(),
            ']' => "%5D".to_string(),
            '|' => "%7C".to_string(),
            c => c.to_string(),
        })
        .collect()
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

fn backticked(text: &str) -> Option<&str> {
    let start = text.find('`')? + 1;
    let len = text[start..].find('`')?;
    Some(&text[start..start + len])
}

fn last_agent_message(state: &SessionState) -> String {
    state.view.last_incoming_message().map(|(_, m)| m.to_string()).unwrap_or_default()
}

fn say(text: &str) -> Value {
    json!({ "action": { "kind": "message", "text": text } })
}

#[tokio::test]
async fn health_and_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    assert_eq!(get(&app, "/health").await, (StatusCode::OK, json!({ "status": "ok" })));

    let (status, list) = get(&app, "/tasks").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list.as_array().unwrap().len(), 3);
    assert_eq!(list[0]["id"], NO_SERVICE_ID);

    let (status, task) = get(&app, &format!("/tasks/{}", encode(NO_SERVICE_ID))).await;
    assert_eq!(status, StatusCode::OK);
    let back: CompositeTask = serde_json::from_value(task).unwrap();
    assert_eq!(back, tasks()[0]);

    let (status, err) = get(&app, "/tasks/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["kind"], "not_found");
}

#[tokio::test]
async fn stored_runs_are_browsable() {
    let dir = tempfile::tempdir().unwrap();
    let task_file = dir.path().join("tasks.json");
    write_tasks(&task_file, &tasks()).unwrap();
    let config = Config::load(None).unwrap();
    let out = commands::run(&config, Some(&task_file), dir.path()).unwrap();
    let run_id = out["run_id"].as_str().unwrap().to_string();
    let app = app(dir.path());

    let (status, runs) = get(&app, "/runs").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(runs[0]["run_id"], run_id.as_str());

    let (status, run) = get(&app, &format!("/runs/{run_id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(run["manifest"]["run_id"], run_id.as_str());
    assert_eq!(run["summary"]["mean_reward"], 1.0);
    assert_eq!(run["results"].as_array().unwrap().len(), 3);
    let files = run["trajectories"].as_array().unwrap();
    assert_eq!(files[0], "0000_t0.jsonl");

    let (status, doc) = get(&app, &format!("/runs/{run_id}/trajectories/0000_t0.jsonl")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["header"]["task_id"], NO_SERVICE_ID);
    assert_eq!(doc["errors"], json!([]));
    assert_eq!(doc["events"].as_array().unwrap().len(), doc["header"]["event_count"].as_u64().unwrap() as usize);

    for uri in [
        "/runs/missing".to_string(),
        format!("/runs/{run_id}/trajectories/9999_t0.jsonl"),
        "/runs/..%2Fsessions".to_string(),
    ] {
        let (status, _) = get(&app, &uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
}

#[tokio::test]
async fn human_user_session_reaches_reward_one() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let no_service = tasks().remove(0);
    let expected = no_service.expected_actions();
    let (status, state) = post(&app, "/sessions", json!({ "task_id": NO_SERVICE_ID, "human_role": "user" })).await;
    assert_eq!(status, StatusCode::CREATED);
    let mut state: SessionState = serde_json::from_value(state).unwrap();
    assert!(state.your_turn);
    assert_eq!(state.reward, None);
    let id = state.session_id.clone();
    let uri = format!("/sessions/{id}/actions");

    let opening = no_service.user_scenario.instructions.reason_for_call.clone();
    let (_, out) = post(&app, &uri, say(&opening)).await;
    state = serde_json::from_value(out["state"].clone()).unwrap();
    for _ in 0..10 {
        if state.finished {
            break;
        }
        let text = last_agent_message(&state);
        let action = match backticked(&text) {
            Some(name) => {
                let call = expected.iter().find(|a| a.name == name).unwrap().to_call();
                let (status, _) = post(&app, &uri, json!({ "action": Action::tool(call) })).await;
                assert_eq!(status, StatusCode::OK);
                say(&format!("Done, I ran {name}."))
            }
            None => say("All good now. ###STOP###"),
        };
        let (status, out) = post(&app, &uri, action).await;
        assert_eq!(status, StatusCode::OK);
        state = serde_json::from_value(out["state"].clone()).unwrap();
    }
    assert!(state.finished);
    assert_eq!(state.reward, Some(1));
    assert!(state.criteria.iter().all(|c| c.passed));

    let (status, err) = post(&app, &uri, say("still there?")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["kind"], "finished");

    let (_, list) = get(&app, "/sessions").await;
    assert_eq!(list[0]["session_id"], id.as_str());
    assert_eq!(list[0]["finished"], true);
    assert!(dir.path().join("sessions").join(format!("{id}.json")).exists());
}

#[tokio::test]
async fn turn_order_and_error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, state) = post(
        &app,
        "/sessions",
        json!({ "task_id": NO_SERVICE_ID, "human_role": "user", "autoplay": false }),
    )
    .await;
    let id = state["session_id"].as_str().unwrap().to_string();
    let (status, out) = post(&app, &format!("/sessions/{id}/actions"), say("My phone has no service.")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["state"]["your_turn"], false);

    let (status, err) = post(&app, &format!("/sessions/{id}/actions"), say("hello?")).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"]["kind"], "not_your_turn");

    let (status, out) = post(&app, &format!("/sessions/{id}/step"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["state"]["your_turn"], true);
    assert_eq!(out["events"][0]["actor"], "agent");

    let (status, _) = get(&app, "/sessions/s9999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post(&app, "/sessions", json!({ "task_id": "nope", "human_role": "user" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, err) = post(
        &app,
        "/sessions",
        json!({ "task_id": NO_SERVICE_ID, "human_role": "user", "mode": "no_user" }),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "invalid");
    let (status, err) = post(&app, &format!("/sessions/{id}/actions"), json!({ "action": { "kind": "dance" } })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "invalid");
}

#[tokio::test]
async fn human_agent_never_sees_user_tool_results() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, state) = post(&app, "/sessions", json!({ "task_id": NO_SERVICE_ID, "human_role": "agent" })).await;
    let id = state["session_id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/actions");
    post(&app, &uri, say("Hi! How can I help you today?")).await;
    let (status, out) = post(&app, &uri, say("Please run `check_status_bar` on your phone.")).await;
    assert_eq!(status, StatusCode::OK);
    let (_, state) = get(&app, &format!("/sessions/{id}")).await;
    for body in [&out["events"], &state["view"]["visible_history"]] {
        for e in body.as_array().unwrap() {
            assert!(e["actor"] == "agent" || e["kind"] == "message", "leaked {e}");
        }
    }
    assert_eq!(state["view"]["role"], "agent");
    assert!(state["view"]["tool_specs"].as_array().unwrap().iter().all(|t| t["name"] != "toggle_airplane_mode"));
}

#[tokio::test]
async fn rewind_creates_a_branch() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, state) = post(&app, "/sessions", json!({ "task_id": NO_SERVICE_ID, "human_role": "user" })).await;
    let id = state["session_id"].as_str().unwrap().to_string();
    post(&app, &format!("/sessions/{id}/actions"), say("No service on my phone.")).await;
    post(&app, &format!("/sessions/{id}/actions"), say("What should I try?")).await;
    let (_, before) = get(&app, &format!("/sessions/{id}")).await;

    let (status, branch) = post(
        &app,
        &format!("/sessions/{id}/rewind"),
        json!({
            "event_index": 1,
            "replacement": { "kind": "message", "text": "Actually my data is slow." },
            "note": "different opening",
        }),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let branch: SessionState = serde_json::from_value(branch).unwrap();
    assert_ne!(branch.session_id, id);
    let rec = branch.intervention.as_ref().unwrap();
    assert_eq!(rec.parent_session_id, id);
    assert_eq!(rec.event_index, 1);
    assert_eq!(rec.note, "different opening");
    assert!(branch
        .view
        .visible_history
        .iter()
        .any(|e| e.message() == Some("Actually my data is slow.")));

    let (_, after) = get(&app, &format!("/sessions/{id}")).await;
    assert_eq!(after, before);
    let (_, list) = get(&app, "/sessions").await;
    assert_eq!(list.as_array().unwrap().len(), 2);

    let (status, _) = post(&app, &format!("/sessions/{id}/rewind"), json!({ "event_index": 999 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

async fn next_update(body: &mut Body) -> (String, SessionUpdate) {
    let mut buf = String::new();
    while !buf.contains("\n\n") {
        let frame = body.frame().await.expect("stream open").unwrap();
        if let Ok(data) = frame.into_data() {
            buf.push_str(std::str::from_utf8(&data).unwrap());
        }
    }
    let mut name = String::new();
    let mut data = String::new();
    for line in buf.lines() {
        if let Some(v) = line.strip_prefix("event:") {
            name = v.trim().to_string();
        } else if let Some(v) = line.strip_prefix("data:") {
            data.push_str(v.trim_start());
        }
    }
    (name, serde_json::from_str(&data).unwrap())
}

#[tokio::test]
async fn event_stream_sends_snapshot_then_steps() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, state) = post(&app, "/sessions", json!({ "task_id": NO_SERVICE_ID, "human_role": "user" })).await;
    let id = state["session_id"].as_str().unwrap().to_string();

    let res = app
        .clone()
        .oneshot(Request::get(format!("/sessions/{id}/events")).body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "text/event-stream");
    let mut body = res.into_body();

    let (name, update) = next_update(&mut body).await;
    assert_eq!(name, "snapshot");
    match update {
        SessionUpdate::Snapshot { state } => assert_eq!(state.session_id, id),
        other => panic!("expected a snapshot, got {other:?}"),
    }

    let (_, out) = post(&app, &format!("/sessions/{id}/actions"), say("No service here.")).await;
    let (name, update) = next_update(&mut body).await;
    assert_eq!(name, "step");
    match update {
        SessionUpdate::Step { outcome } => {
            assert_eq!(serde_json::to_value(&outcome).unwrap(), out);
            assert_eq!(outcome.events[0].message(), Some("No service here."));
        }
        other => panic!("expected a step, got {other:?}"),
    }

    post(&app, &format!("/sessions/{id}/rewind"), json!({ "event_index": 1 })).await;
    let (name, update) = next_update(&mut body).await;
    assert_eq!(name, "branch");
    assert!(matches!(update, SessionUpdate::Branch { state } if state.intervention.is_some()));

    let (status, _) = get(&app, "/sessions/s9999/events").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn payloads_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, raw) = post(&app, "/sessions", json!({ "task_id": NO_SERVICE_ID, "human_role": "agent" })).await;
    let state: SessionState = serde_json::from_value(raw.clone()).unwrap();
    assert_eq!(serde_json::to_value(&state).unwrap(), raw);

    let update = SessionUpdate::Snapshot { state };
    let text = serde_json::to_value(&update).unwrap();
    assert_eq!(text["type"], "snapshot");
    assert_eq!(serde_json::from_value::<SessionUpdate>(text).unwrap(), update);

    let action: Action = serde_json::from_value(json!({ "kind": "tool_call", "name": "check_status_bar" })).unwrap();
    assert_eq!(
        serde_json::to_value(&action).unwrap(),
        json!({ "kind": "tool_call", "name": "check_status_bar", "args": {} })
    );
}
