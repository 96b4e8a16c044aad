//! Quota-driven sampling and persona assignment.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CompositeTask, Intent, Persona, TaskError};

/// Required count per (intent, number of subtasks).
pub type Quotas = BTreeMap<(Intent, usize), usize>;

/// The balanced 114-task suite: 29 service, 36 mobile-data, 49 MMS.
pub fn default_quotas() -> Quotas {
    let rows: [(Intent, &[(usize, usize)]); 3] = [
        (Intent::ServiceIssue, &[(2, 9), (3, 9), (4, 9), (5, 2)]),
        (
            Intent::MobileDataIssue,
            &[(2, 8), (3, 8), (4, 6), (5, 6), (6, 5), (7, 3)],
        ),
        (
            Intent::MmsIssue,
            &[(2, 8), (3, 9), (4, 6), (5, 5), (6, 6), (7, 5), (8, 4), (9, 6)],
        ),
    ];
    rows.iter()
        .flat_map(|(intent, cells)| cells.iter().map(move |&(n, q)| ((*intent, n), q)))
        .collect()
}

/// Draws each cell's quota uniformly without replacement. Cells are visited
/// in sorted order from one seeded stream; within a cell the original order
/// is kept.
pub fn sample_balanced(
    tasks: &[CompositeTask],
    quotas: &Quotas,
    seed: u64,
) -> Result<Vec<CompositeTask>, TaskError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (&(intent, subtasks), &needed) in quotas {
        let pool: Vec<&CompositeTask> = tasks
            .iter()
            .filter(|t| t.intent() == intent && t.n_subtasks() == subtasks)
            .collect();
        if pool.len() < needed {
            return Err(TaskError::InsufficientSupply {
                intent,
                subtasks,
                needed,
                available: pool.len(),
            });
        }
        let mut picked = index::sample(&mut rng, pool.len(), needed).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| pool[i].clone()));
    }
    Ok(out)
}

/// Uniform persona per task, deterministic in `seed` and task order.
pub fn assign_personas(tasks: &mut [CompositeTask], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for task in tasks {
        let persona = Persona::ALL[rng.random_range(0..Persona::ALL.len())];
        set_persona(task, persona);
    }
}

pub fn set_persona(task: &mut CompositeTask, persona: Persona) {
    task.metadata.persona = persona;
    task.user_scenario.persona = persona.text().map(str::to_string);
}
