//! Group-wise composition: pick at most one member per group.

use std::collections::BTreeSet;

use super::{
    AssertionCall, AtomicSubtask, CompositeTask, Description, EnvAssertion, EvaluationCriteria,
    ExpectedAction, InitialState, Instructions, IntentSpec, Persona, TaskError, TaskMetadata,
    UserScenario,
};

pub type Compatibility = fn(&[&AtomicSubtask]) -> bool;

#[derive(Debug, Clone, Copy)]
pub struct ComposeConstraints {
    pub min_subtasks: usize,
    pub max_subtasks: Option<usize>,
    /// Optional veto over a selection.
    pub compatible: Option<Compatibility>,
}

impl Default for ComposeConstraints {
    fn default() -> Self {
        ComposeConstraints {
            min_subtasks: 1,
            max_subtasks: None,
            compatible: None,
        }
    }
}

/// Every non-empty selection as per-group choices (`None` = group skipped),
/// in mixed-radix order with the last group varying fastest.
pub fn selections(group_sizes: &[usize]) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    let mut digits = vec![0usize; group_sizes.len()];
    loop {
        if digits.iter().any(|&d| d > 0) {
            out.push(
                digits
                    .iter()
                    .map(|&d| if d == 0 { None } else { Some(d - 1) })
                    .collect(),
            );
        }
        // increment, last position fastest
        let mut pos = group_sizes.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] <= group_sizes[pos] {
                break;
            }
            digits[pos] = 0;
        }
    }
}

pub fn composite_id(intent: super::Intent, subtask_ids: &[&str]) -> String {
    format!("[{intent}]{}", subtask_ids.join("|"))
}

/// Builds the composite for one selection of members (in group order).
pub fn build_composite(spec: &IntentSpec, members: &[&AtomicSubtask]) -> CompositeTask {
    let t = &spec.template;
    let ids: Vec<&str> = members.iter().map(|m| m.id.as_str()).collect();

    let mut init = t.preamble.clone();
    let mut actions = Vec::new();
    let mut assertions: Vec<AssertionCall> = Vec::new();
    let mut task_instructions = t.task_instructions.clone();
    let mut ticket = t.ticket.clone();
    for m in members {
        init.extend(m.init_calls.iter().cloned());
        for call in &m.solution_calls {
            actions.push(ExpectedAction {
                action_id: format!("{}_{}", call.name, actions.len()),
                requestor: call.requestor,
                name: call.name.clone(),
                arguments: call.args.clone(),
            });
        }
        for a in &m.assertion_calls {
            if !assertions.contains(a) {
                assertions.push(a.clone());
            }
        }
        if let Some(note) = m.scenario_note.as_ref().filter(|n| !task_instructions.contains(n.as_str())) {
            task_instructions.push(' ');
            task_instructions.push_str(note);
        }
        if let Some(note) = m.ticket_note.as_ref().filter(|n| !ticket.contains(n.as_str())) {
            ticket.push(' ');
            ticket.push_str(note);
        }
    }

    CompositeTask {
        id: composite_id(spec.intent, &ids),
        description: Description {
            purpose: t.purpose.clone(),
        },
        user_scenario: UserScenario {
            persona: None,
            instructions: Instructions {
                domain: t.domain.clone(),
                reason_for_call: t.reason_for_call.clone(),
                known_info: t.known_info.clone(),
                unknown_info: t.unknown_info.clone(),
                task_instructions,
            },
        },
        ticket,
        initial_state: InitialState {
            initialization_data: None,
            initialization_actions: init,
        },
        evaluation: EvaluationCriteria {
            actions,
            env_assertions: assertions
                .into_iter()
                .map(|a| EnvAssertion {
                    env: a.env,
                    function: a.function,
                    arguments: a.args,
                    assert_value: a.expected,
                })
                .collect(),
            communicate_info: Vec::new(),
            nl_assertions: Vec::new(),
            match_actions: false,
            db_hashes: None,
        },
        metadata: TaskMetadata {
            intent: spec.intent,
            persona: Persona::None,
            subtasks: ids.iter().map(|s| s.to_string()).collect(),
            groups: members.iter().map(|m| m.group_id.clone()).collect(),
        },
    }
}

/// All composites of one intent that satisfy `constraints`.
pub fn compose_tasks(
    spec: &IntentSpec,
    constraints: &ComposeConstraints,
) -> Result<Vec<CompositeTask>, TaskError> {
    if spec.groups.is_empty() {
        return Err(TaskError::Config(format!("intent {} has no groups", spec.intent)));
    }
    let mut seen = BTreeSet::new();
    for g in &spec.groups {
        if !seen.insert(g.group_id.as_str()) {
            return Err(TaskError::Config(format!("duplicate group id '{}'", g.group_id)));
        }
        if g.members.is_empty() {
            return Err(TaskError::Config(format!("group '{}' is empty", g.group_id)));
        }
    }
    let sizes: Vec<usize> = spec.groups.iter().map(|g| g.members.len()).collect();
    let max = constraints.max_subtasks.unwrap_or(usize::MAX);
    let mut out = Vec::new();
    for sel in selections(&sizes) {
        let members: Vec<&AtomicSubtask> = sel
            .iter()
            .zip(&spec.groups)
            .filter_map(|(choice, g)| choice.map(|i| &g.members[i]))
            .collect();
        if members.len() < constraints.min_subtasks || members.len() > max {
            continue;
        }
        if let Some(ok) = constraints.compatible {
            if !ok(&members) {
                continue;
            }
        }
        out.push(build_composite(spec, &members));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{Intent, ScenarioTemplate, SubtaskGroup};
    use super::*;

    pub(crate) fn synthetic(sizes: &[usize]) -> IntentSpec {
        IntentSpec {
            intent: Intent::ServiceIssue,
            template: ScenarioTemplate {
                domain: "test".into(),
                purpose: String::new(),
                reason_for_call: String::new(),
                known_info: String::new(),
                unknown_info: None,
                task_instructions: String::new(),
                ticket: String::new(),
                preamble: vec![],
            },
            groups: sizes
                .iter()
                .enumerate()
                .map(|(g, &n)| SubtaskGroup {
                    group_id: format!("g{g}"),
                    members: (0..n)
                        .map(|m| AtomicSubtask {
                            id: format!("g{g}m{m}"),
                            intent: Intent::ServiceIssue,
                            group_id: format!("g{g}"),
                            init_calls: vec![],
                            solution_calls: vec![],
                            assertion_calls: vec![],
                            scenario_note: None,
                            ticket_note: None,
                        })
                        .collect(),
                })
                .collect(),
            min_subtasks: 1,
            max_subtasks: usize::MAX,
        }
    }

    #[test]
    fn sizes_two_and_three_give_eleven() {
        let tasks = compose_tasks(&synthetic(&[2, 3]), &ComposeConstraints::default()).unwrap();
        assert_eq!(tasks.len(), 11);
        // brute force: each group independently skipped or one of its members
        let mut expected = Vec::new();
        for a in [None, Some(0), Some(1)] {
            for b in [None, Some(0), Some(1), Some(2)] {
                let mut ids = vec![];
                if let Some(a) = a {
                    ids.push(format!("g0m{a}"));
                }
                if let Some(b) = b {
                    ids.push(format!("g1m{b}"));
                }
                if !ids.is_empty() {
                    expected.push(format!("[service_issue]{}", ids.join("|")));
                }
            }
        }
        let got: BTreeSet<_> = tasks.iter().map(|t| t.id.clone()).collect();
        assert_eq!(got, expected.into_iter().collect());
    }

    #[test]
    fn single_group_of_one() {
        let tasks = compose_tasks(&synthetic(&[1]), &ComposeConstraints::default()).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].id, "[service_issue]g0m0");
    }

    #[test]
    fn empty_group_list_is_a_config_error() {
        assert!(matches!(
            compose_tasks(&synthetic(&[]), &ComposeConstraints::default()),
            Err(TaskError::Config(_))
        ));
    }

    #[test]
    fn bounds_and_compatibility_filter() {
        let spec = synthetic(&[1, 1, 1]);
        let only_pairs = ComposeConstraints {
            min_subtasks: 2,
            max_subtasks: Some(2),
            compatible: None,
        };
        assert_eq!(compose_tasks(&spec, &only_pairs).unwrap().len(), 3);
        fn no_g0_with_g2(m: &[&AtomicSubtask]) -> bool {
            !(m.iter().any(|s| s.group_id == "g0") && m.iter().any(|s| s.group_id == "g2"))
        }
        let vetoed = ComposeConstraints {
            compatible: Some(no_g0_with_g2),
            ..ComposeConstraints::default()
        };
        // 7 selections minus {g0,g2} and {g0,g1,g2}
        assert_eq!(compose_tasks(&spec, &vetoed).unwrap().len(), 5);
    }

    #[test]
    fn duplicate_group_ids_rejected() {
        let mut spec = synthetic(&[1, 1]);
        spec.groups[1].group_id = "g0".into();
        assert!(compose_tasks(&spec, &ComposeConstraints::default()).is_err());
    }
}
