//! pass^k grouped by mode, intent, persona, action count and subtask count.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{pass_hat_k_curve, EvalError, TrialRecord};
use crate::orchestrator::Mode;
use crate::tasks::{CompositeTask, Intent, Persona};

pub const ACTION_BINS: [&str; 5] = ["1-2", "3-4", "5-7", "8+", "transfer"];

/// Transfer tasks get their own bin regardless of length.
pub fn action_bin(task: &CompositeTask) -> &'static str {
    if task.requires_transfer() {
        return "transfer";
    }
    match task.n_actions() {
        0..=2 => "1-2",
        3..=4 => "3-4",
        5..=7 => "5-7",
        _ => "8+",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub bin: String,
    pub n_tasks: usize,
    /// Share of the table's tasks that fall in this bin.
    pub proportion: f64,
    /// pass^1..pass^k for the bin; empty when the bin has no tasks.
    pub pass_k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownTable {
    pub dimension: String,
    /// `None` for the table that groups by mode.
    pub mode: Option<Mode>,
    pub rows: Vec<BreakdownRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub by_mode: BreakdownTable,
    /// Per mode present: intent, persona, action-bin and subtask-count tables.
    pub tables: Vec<BreakdownTable>,
}

fn table(
    dimension: &str,
    mode: Option<Mode>,
    bins: &[String],
    records: &[&TrialRecord],
    key: impl Fn(&TrialRecord) -> String,
) -> BreakdownTable {
    let total: BTreeSet<&str> = records.iter().map(|r| r.task_id.as_str()).collect();
    let rows = bins
        .iter()
        .map(|bin| {
            let in_bin: Vec<TrialRecord> = records.iter().filter(|r| key(r) == *bin).map(|r| (*r).clone()).collect();
            let tasks: BTreeSet<&str> = in_bin.iter().map(|r| r.task_id.as_str()).collect();
            BreakdownRow {
                bin: bin.clone(),
                n_tasks: tasks.len(),
                proportion: if total.is_empty() {
                    0.0
                } else {
                    tasks.len() as f64 / total.len() as f64
                },
                pass_k: pass_hat_k_curve(&in_bin).values,
            }
        })
        .collect();
    BreakdownTable {
        dimension: dimension.into(),
        mode,
        rows,
    }
}

/// Every record's task must be in `tasks`.
pub fn breakdown_tables(records: &[TrialRecord], tasks: &[CompositeTask]) -> Result<BreakdownReport, EvalError> {
    let by_id: BTreeMap<&str, &CompositeTask> = tasks.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut action_bins: BTreeMap<&str, &'static str> = BTreeMap::new();
    for r in records {
        let task = by_id
            .get(r.task_id.as_str())
            .ok_or_else(|| EvalError::Config(format!("record for unknown task '{}'", r.task_id)))?;
        action_bins.insert(task.id.as_str(), action_bin(task));
    }
    let all: Vec<&TrialRecord> = records.iter().collect();
    let modes: BTreeSet<Mode> = records.iter().map(|r| r.mode).collect();
    let by_mode = table(
        "mode",
        None,
        &Mode::ALL.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        &all,
        |r| r.mode.to_string(),
    );

    let intents: Vec<String> = Intent::ALL.iter().map(|i| i.to_string()).collect();
    let personas: Vec<String> = Persona::ALL.iter().map(|p| p.as_str().to_string()).collect();
    let actions: Vec<String> = ACTION_BINS.iter().map(|s| s.to_string()).collect();
    let max_subtasks = records.iter().map(|r| r.n_subtasks).max().unwrap_or(0);
    let subtasks: Vec<String> = (1..=max_subtasks).map(|n| n.to_string()).collect();

    let mut tables = Vec::new();
    for mode in modes {
        let rs: Vec<&TrialRecord> = records.iter().filter(|r| r.mode == mode).collect();
        tables.push(table("intent", Some(mode), &intents, &rs, |r| r.intent.to_string()));
        tables.push(table("persona", Some(mode), &personas, &rs, |r| r.persona.as_str().to_string()));
        tables.push(table("action_bin", Some(mode), &actions, &rs, |r| {
            action_bins[r.task_id.as_str()].to_string()
        }));
        tables.push(table("subtask_count", Some(mode), &subtasks, &rs, |r| r.n_subtasks.to_string()));
    }
    Ok(BreakdownReport { by_mode, tables })
}
