//! pass^k: the chance that k independent trials of a task all succeed.

use std::collections::BTreeMap;

use num_integer::binomial;
use serde::{Deserialize, Serialize};

use super::{EvalError, TrialRecord};

/// Mean over tasks of C(c, k) / C(n, k), from per-task (successes, trials).
pub fn pass_hat_k(counts: &[(usize, usize)], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::Argument("k must be at least 1".into()));
    }
    if counts.is_empty() {
        return Err(EvalError::Argument("no tasks".into()));
    }
    let mut total = 0.0;
    for &(c, n) in counts {
        if c > n {
            return Err(EvalError::Argument(format!("{c} successes out of {n} trials")));
        }
        if k > n {
            return Err(EvalError::Argument(format!("k = {k} exceeds the {n} trials of a task")));
        }
        let num = binomial(c as u128, k as u128);
        let den = binomial(n as u128, k as u128);
        total += num as f64 / den as f64;
    }
    Ok(total / counts.len() as f64)
}

/// (successes, trials) per task.
pub fn success_counts(records: &[TrialRecord]) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let entry = out.entry(r.task_id.clone()).or_default();
        entry.0 += usize::from(r.success());
        entry.1 += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassKCurve {
    /// pass^k for k = 1..=min trials; index 0 is k = 1.
    pub values: Vec<f64>,
    pub per_task: BTreeMap<String, (usize, usize)>,
}

pub fn pass_hat_k_curve(records: &[TrialRecord]) -> PassKCurve {
    let per_task = success_counts(records);
    let counts: Vec<(usize, usize)> = per_task.values().copied().collect();
    let max_k = counts.iter().map(|&(_, n)| n).min().unwrap_or(0);
    let values = (1..=max_k)
        .map(|k| pass_hat_k(&counts, k).expect("k within every task's trials"))
        .collect();
    PassKCurve { values, per_task }
}
