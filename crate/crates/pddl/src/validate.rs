//! Plan validation by replaying steps against the ground task.

use thiserror::Error;

use crate::ground::GroundTask;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("step {step} '{action}': {msg}")]
pub struct ValidationError {
    /// Zero-based plan position; `steps.len()` for goal violations.
    pub step: usize,
    pub action: String,
    pub msg: String,
}

/// Replays `steps` from the initial state. Returns the summed action cost when
/// every precondition holds along the way and the goal holds at the end.
pub fn validate(task: &GroundTask, steps: &[u32]) -> Result<f64, ValidationError> {
    let mut state = vec![false; task.atoms.len()];
    for &i in &task.init {
        state[i as usize] = true;
    }
    let mut cost = 0.0;
    for (step, &ai) in steps.iter().enumerate() {
        let a = task
            .actions
            .get(ai as usize)
            .ok_or_else(|| ValidationError {
                step,
                action: format!("#{ai}"),
                msg: "action index out of range".into(),
            })?;
        for &p in &a.pre_pos {
            if !state[p as usize] {
                return Err(ValidationError {
                    step,
                    action: a.name.clone(),
                    msg: format!(
                        "positive precondition {} not satisfied",
                        task.atoms[p as usize]
                    ),
                });
            }
        }
        for &p in &a.pre_neg {
            if state[p as usize] {
                return Err(ValidationError {
                    step,
                    action: a.name.clone(),
                    msg: format!(
                        "negative precondition (not {}) not satisfied",
                        task.atoms[p as usize]
                    ),
                });
            }
        }
        for &d in &a.del {
            state[d as usize] = false;
        }
        for &ad in &a.add {
            state[ad as usize] = true;
        }
        cost += a.cost;
    }
    for &g in &task.goal_pos {
        if !state[g as usize] {
            return Err(ValidationError {
                step: steps.len(),
                action: "<goal>".into(),
                msg: format!("goal atom {} not satisfied", task.atoms[g as usize]),
            });
        }
    }
    for &g in &task.goal_neg {
        if state[g as usize] {
            return Err(ValidationError {
                step: steps.len(),
                action: "<goal>".into(),
                msg: format!("goal atom (not {}) not satisfied", task.atoms[g as usize]),
            });
        }
    }
    Ok(cost)
}
