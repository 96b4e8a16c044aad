use serde_json::{json, Value};

use duet::api;

const NO_SERVICE_ID: &str = "[service_issue]airplane_mode_on|unseat_sim_card";

fn no_service() -> Value {
    let all: Vec<Value> = serde_json::from_str(&api::compose_tasks().unwrap()).unwrap();
    all.into_iter().find(|t| t["ID"] == NO_SERVICE_ID).unwrap()
}

#[test]
fn suite_and_verification() {
    let suite: Vec<Value> = serde_json::from_str(&api::sample_suite(42).unwrap()).unwrap();
    assert_eq!(suite.len(), 114);
    assert_eq!(api::sample_suite(42).unwrap(), api::sample_suite(42).unwrap());
    let report: Value = serde_json::from_str(&api::verify(&no_service().to_string()).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert!(api::verify("{}").unwrap_err().starts_with("invalid task"));
}

#[test]
fn oracle_runs_score_one_in_every_mode() {
    let task = no_service().to_string();
    for mode in ["default", "no_user", "ground_truth"] {
        let out: Vec<Value> = serde_json::from_str(&api::run_oracle(&task, mode, 2, 3).unwrap()).unwrap();
        assert_eq!(out.len(), 2);
        for r in &out {
            assert_eq!(r["record"]["reward"], 1, "{mode}");
            assert_eq!(r["trajectory"]["mode"], mode);
        }
    }
    assert!(api::run_oracle(&task, "solo", 1, 0).is_err());
}

#[test]
fn hand_stepped_environment() {
    let mut env = api::Env::new(&no_service().to_string()).unwrap();
    assert_eq!(env.task_id(), NO_SERVICE_ID);
    assert!(!env.solved().unwrap());
    let user_tools: Vec<Value> = serde_json::from_str(&env.tools("user").unwrap()).unwrap();
    assert!(user_tools.iter().any(|t| t["name"] == "toggle_airplane_mode"));
    let before = env.hashes().unwrap();
    for name in ["toggle_airplane_mode", "reseat_sim_card"] {
        let call = json!({ "kind": "tool_call", "name": name });
        let obs: Value = serde_json::from_str(&env.step("user", &call.to_string()).unwrap()).unwrap();
        assert_ne!(obs["kind"], "error", "{obs}");
    }
    assert!(env.solved().unwrap());
    assert_ne!(env.hashes().unwrap(), before);
    let results: Vec<Value> = serde_json::from_str(&env.assertions().unwrap()).unwrap();
    assert!(results.iter().all(|r| r["passed"] == true));
    let history: Vec<Value> = serde_json::from_str(&env.history()).unwrap();
    assert_eq!(history.len(), 2);
    assert!(env.step("referee", "{}").is_err());
}

#[test]
fn pass_hat_k_matches_hand_values() {
    // one task, 4 trials, 2 successes: C(2,2)/C(4,2) = 1/6
    assert!((api::pass_hat(&[(2, 4)], 2).unwrap() - 1.0 / 6.0).abs() < 1e-12);
    assert!((api::pass_hat(&[(4, 4), (0, 4)], 1).unwrap() - 0.5).abs() < 1e-12);
    assert!(api::pass_hat(&[(1, 2)], 3).is_err());
}
