//! Growing the task set: successful rollouts of unpooled goals become new
//! tasks, and failed rollouts are relabelled with an intent they do satisfy.

mod intent;

pub use intent::{
    infer_intent, refine_intent, IntentCandidate, IntentOracle, IntentRewriter, LlmIntent, LlmRewriter, MockIntent,
    RuleSet, Verdict,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trajectory::{Source, Trajectory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtrapolationError {
    #[error("trajectory for '{task_id}' has no environment feedback")]
    MissingFeedback { task_id: String },
    #[error("intent oracle unavailable: {0}")]
    OracleUnavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOrigin {
    Seed,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledTask {
    pub task_id: String,
    pub goal: String,
    pub origin: TaskOrigin,
}

/// Goals available for sampling. Keyed by goal text; never shrinks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPool {
    pub iteration: u32,
    goals: BTreeMap<String, PooledTask>,
}

impl TaskPool {
    pub fn new(iteration: u32) -> Self {
        TaskPool { iteration, goals: BTreeMap::new() }
    }

    /// Adds a task unless its goal is already pooled. Returns whether it was added.
    pub fn insert(&mut self, task_id: impl Into<String>, goal: impl Into<String>, origin: TaskOrigin) -> bool {
        let goal = goal.into();
        if self.goals.contains_key(&goal) {
            return false;
        }
        self.goals.insert(goal.clone(), PooledTask { task_id: task_id.into(), goal, origin });
        true
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }

    pub fn contains_goal(&self, goal: &str) -> bool {
        self.goals.contains_key(goal)
    }

    pub fn contains_task(&self, task_id: &str) -> bool {
        self.goals.values().any(|t| t.task_id == task_id)
    }

    /// Pooled tasks ordered by task id.
    pub fn tasks(&self) -> Vec<&PooledTask> {
        let mut v: Vec<&PooledTask> = self.goals.values().collect();
        v.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        v
    }
}

#[derive(Debug, Clone)]
pub struct Augmentation {
    pub pool: TaskPool,
    /// Successful trajectories of newly pooled goals, tagged pseudo-expert.
    pub pseudo_experts: Vec<Trajectory>,
}

/// Pools the goal of every successful trajectory not already pooled; the
/// returned pool is one iteration later.
pub fn augment_tasks(pool: &TaskPool, evaluated: &[Trajectory]) -> Result<Augmentation, ExtrapolationError> {
    let mut next = pool.clone();
    next.iteration += 1;
    let mut pseudo_experts = Vec::new();
    for t in evaluated {
        let ok = t.env_feedback.ok_or_else(|| ExtrapolationError::MissingFeedback { task_id: t.task_id.clone() })?;
        if ok && next.insert(t.task_id.clone(), t.goal.clone(), TaskOrigin::Augmented) {
            let mut demo = t.clone();
            demo.source = Source::PseudoExpert;
            pseudo_experts.push(demo);
        }
    }
    Ok(Augmentation { pool: next, pseudo_experts })
}

/// Why a failed trajectory produced no training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub task_id: String,
    pub raw: String,
    pub rule_fired: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Harvest {
    /// Failed trajectories relabelled with their refined intent (also set as
    /// the trajectory's goal).
    pub pairs: Vec<(Trajectory, String)>,
    pub candidates: Vec<IntentCandidate>,
    pub drops: Vec<DropRecord>,
}

/// infer → refine for each failed trajectory; accepted intents become pairs.
pub fn harvest_failed(
    failed: &[Trajectory],
    oracle: &dyn IntentOracle,
    rules: &RuleSet,
    rewriter: Option<&dyn IntentRewriter>,
) -> Harvest {
    let mut out = Harvest::default();
    for t in failed {
        let c = match infer_intent(t, oracle) {
            Ok(c) => refine_intent(&c, rules, rewriter),
            Err(e) => {
                log::info!("{}: no intent inferred: {e}", t.task_id);
                out.drops.push(DropRecord { task_id: t.task_id.clone(), raw: String::new(), rule_fired: Some("oracle".into()) });
                continue;
            }
        };
        match (&c.verdict, &c.refined) {
            (Verdict::Accepted, Some(goal)) => {
                let mut relabelled = t.clone();
                relabelled.goal = goal.clone();
                out.pairs.push((relabelled, goal.clone()));
            }
            _ => {
                log::debug!("{}: intent {:?} dropped by {:?}", t.task_id, c.raw, c.rule_fired);
                out.drops.push(DropRecord { task_id: t.task_id.clone(), raw: c.raw.clone(), rule_fired: c.rule_fired.clone() });
            }
        }
        out.candidates.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Action, Element, UiState};

    fn traj(id: &str, goal: &str, ok: Option<bool>) -> Trajectory {
        let mut t = Trajectory::new(id, goal, Source::Sampled);
        t.push(UiState { elements: vec![Element::new("1", "DIV", "Pro Expense")], ..Default::default() }, Action::click("1"));
        t.env_feedback = ok;
        t
    }

    #[test]
    fn augmentation_is_a_set_union() {
        let mut pool = TaskPool::new(0);
        pool.insert("a", "Goal A", TaskOrigin::Seed);
        let none = augment_tasks(&pool, &[traj("b", "Goal B", Some(false))]).unwrap();
        assert_eq!((none.pool.len(), none.pool.iteration), (1, 1));
        let one = augment_tasks(&pool, &[traj("b", "Goal B", Some(true)), traj("b", "Goal B", Some(true))]).unwrap();
        assert_eq!(one.pool.len(), 2);
        assert_eq!(one.pseudo_experts.len(), 1);
        assert_eq!(one.pseudo_experts[0].source, Source::PseudoExpert);
        let dup = augment_tasks(&pool, &[traj("a", "Goal A", Some(true))]).unwrap();
        assert_eq!(dup.pool.len(), 1);
        assert!(dup.pseudo_experts.is_empty());
        assert_eq!(
            augment_tasks(&pool, &[traj("c", "Goal C", None)]).unwrap_err(),
            ExtrapolationError::MissingFeedback { task_id: "c".into() }
        );
    }

    #[test]
    fn harvest_relabels_accepted_intents() {
        let h = harvest_failed(&[traj("a", "Goal A", Some(false))], &MockIntent::default(), &RuleSet::default(), None);
        assert_eq!(h.pairs.len(), 1);
        assert_eq!(h.pairs[0].1, "Perform: Click on a UI element 'Pro Expense'");
        assert_eq!(h.pairs[0].0.goal, h.pairs[0].1);
        let empty = Trajectory::new("e", "g", Source::Sampled);
        let h = harvest_failed(&[empty], &MockIntent::default(), &RuleSet::default(), None);
        assert!(h.pairs.is_empty());
        assert_eq!(h.drops.len(), 1);
    }
}
