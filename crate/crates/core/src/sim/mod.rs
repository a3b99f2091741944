//! A small declarative shop world: pages of elements, pattern-matched
//! transitions, tasks with success conditions and known solution routes.
//!
//! The world is plain data ([`WorldSpec`], JSON with `pages`, `transitions`
//! and `tasks` sections); [`step`] and [`feedback`] interpret it.

mod fixtures;
mod policy;

pub use fixtures::generate_fixture_suite;
pub use policy::{stable_hash, Behavior, PolicyParams, SamplingConfig, ScriptedPolicy};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::normalize_text;
use crate::dsl::registry::WISHLIST_TAG;
use crate::trajectory::{
    describe_trajectory, Action, ActionKind, Direction, Element, Source, TemplateTable, Trajectory, UiState,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid world spec: {0}")]
    Spec(String),
    #[error("unknown task '{0}'")]
    UnknownTask(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSpec {
    pub url: String,
    pub elements: Vec<Element>,
}

/// Which actions a transition fires on. Absent fields match anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPattern {
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Typed text, compared case-insensitively after trimming.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app: Option<String>,
}

impl ActionPattern {
    fn matches(&self, action: &Action) -> bool {
        if action.kind() != self.kind {
            return false;
        }
        if let Some(t) = &self.target {
            if action.target_id() != Some(t.as_str()) {
                return false;
            }
        }
        match action {
            Action::Type { text, .. } => {
                self.text.as_ref().map_or(true, |want| want.trim().to_lowercase() == text.trim().to_lowercase())
            }
            Action::Scroll { direction } => self.direction.map_or(true, |d| d == *direction),
            Action::OpenApp { app } => self.app.as_ref().map_or(true, |a| a == app),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Effect {
    /// Appends an item to the wishlist (no duplicates).
    AddToWishlist { item: String },
    /// Stores the typed text as the current search query.
    SetQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub on: ActionPattern,
    /// Destination page; absent means stay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub effects: Vec<Effect>,
}

/// Declarative success condition, checked on the final world state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    WishlistContains { item: String },
    AnswerEquals { answer: String },
    OnPage { page: String },
    QueryEquals { query: String },
    All { all: Vec<Condition> },
}

impl Condition {
    pub fn holds(&self, s: &WorldState) -> bool {
        match self {
            Condition::WishlistContains { item } => s.wishlist.iter().any(|w| normalize_text(w) == normalize_text(item)),
            Condition::AnswerEquals { answer } => {
                s.answer.as_deref().is_some_and(|a| normalize_text(a).to_lowercase() == normalize_text(answer).to_lowercase())
            }
            Condition::OnPage { page } => &s.page == page,
            Condition::QueryEquals { query } => {
                s.query.as_deref().is_some_and(|q| q.trim().to_lowercase() == query.trim().to_lowercase())
            }
            Condition::All { all } => all.iter().all(|c| c.holds(s)),
        }
    }
}

/// One known way of solving a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub name: String,
    pub actions: Vec<Action>,
    /// Indices into `actions` an annotator marks as key steps.
    pub key_steps: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTask {
    pub task_id: String,
    pub goal: String,
    pub success: Condition,
    pub routes: Vec<Route>,
    pub split: Split,
    /// Descriptions of the annotated key steps over all routes.
    #[serde(default)]
    pub ground_truth_key_steps: BTreeSet<String>,
}

impl SimTask {
    pub fn is_multi_route(&self) -> bool {
        self.routes.len() >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub seed: u64,
    pub app_name: String,
    pub start_page: String,
    pub pages: BTreeMap<String, PageSpec>,
    pub transitions: Vec<Transition>,
    /// URLs an agent may navigate to directly.
    #[serde(default)]
    pub shortcuts: Vec<String>,
    pub tasks: Vec<SimTask>,
}

impl WorldSpec {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let w: WorldSpec = serde_json::from_str(text)?;
        w.check()?;
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        WorldSpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("world spec serializes");
        s.push('\n');
        s
    }

    /// Structural checks: start page and every transition endpoint exist.
    pub fn check(&self) -> Result<(), SimError> {
        if !self.pages.contains_key(&self.start_page) {
            return Err(SimError::Spec(format!("start page '{}' is not defined", self.start_page)));
        }
        for t in &self.transitions {
            for p in std::iter::once(&t.from).chain(t.to.iter()) {
                if !self.pages.contains_key(p) {
                    return Err(SimError::Spec(format!("transition references unknown page '{p}'")));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for task in &self.tasks {
            if !ids.insert(&task.task_id) {
                return Err(SimError::Spec(format!("duplicate task id '{}'", task.task_id)));
            }
        }
        Ok(())
    }

    pub fn task(&self, id: &str) -> Result<&SimTask, SimError> {
        self.tasks.iter().find(|t| t.task_id == id).ok_or_else(|| SimError::UnknownTask(id.to_string()))
    }

    pub fn initial_state(&self) -> WorldState {
        WorldState { page: self.start_page.clone(), ..Default::default() }
    }

    /// What the agent sees: the page's elements followed by the wishlist panel.
    pub fn observe(&self, s: &WorldState) -> UiState {
        let page = &self.pages[&s.page];
        let mut elements = page.elements.clone();
        for (i, item) in s.wishlist.iter().enumerate() {
            elements.push(Element::new(format!("wish-{i}"), WISHLIST_TAG, item.clone()));
        }
        UiState { elements, url: Some(page.url.clone()), app_name: Some(self.app_name.clone()), screenshot_ref: None }
    }

    /// Distinct typed texts that some transition reacts to.
    pub fn query_vocabulary(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.transitions.iter().filter_map(|t| t.on.text.clone()).collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorldState {
    pub page: String,
    pub wishlist: Vec<String>,
    pub query: Option<String>,
    pub answer: Option<String>,
    pub stopped: bool,
}

/// Applies one action. Actions that match no transition leave the state as
/// it was; actions that cannot be performed at all are `InvalidAction`.
pub fn step(world: &WorldSpec, s: &WorldState, action: &Action) -> Result<WorldState, SimError> {
    if s.stopped {
        return Err(SimError::InvalidAction("episode already stopped".into()));
    }
    if let Some(id) = action.target_id() {
        if world.observe(s).element(id).is_none() {
            return Err(SimError::InvalidAction(format!("no element '{id}' on page '{}'", s.page)));
        }
    }
    let mut next = s.clone();
    match action {
        Action::Stop { answer } => {
            next.stopped = true;
            next.answer = Some(answer.clone());
            return Ok(next);
        }
        Action::Navigate { url } => {
            let page = world
                .pages
                .iter()
                .find(|(_, p)| &p.url == url)
                .map(|(id, _)| id.clone())
                .ok_or_else(|| SimError::InvalidAction(format!("unknown url '{url}'")))?;
            next.page = page;
            return Ok(next);
        }
        _ => {}
    }
    let Some(tr) = world.transitions.iter().find(|t| t.from == s.page && t.on.matches(action)) else {
        return Ok(next);
    };
    for e in &tr.effects {
        match e {
            Effect::AddToWishlist { item } => {
                if !next.wishlist.contains(item) {
                    next.wishlist.push(item.clone());
                }
            }
            Effect::SetQuery => {
                if let Action::Type { text, .. } = action {
                    next.query = Some(text.trim().to_string());
                }
            }
        }
    }
    if let Some(to) = &tr.to {
        next.page = to.clone();
    }
    Ok(next)
}

/// Environment feedback: the agent stopped and the task's condition holds.
pub fn feedback(final_state: &WorldState, task: &SimTask) -> bool {
    final_state.stopped && task.success.holds(final_state)
}

/// A finished episode.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub trajectory: Trajectory,
    pub final_state: WorldState,
    pub invalid_actions: usize,
    /// The step budget ran out before a stop action.
    pub truncated: bool,
}

/// Runs `choose` until it stops or `budget` steps are used. Invalid actions
/// are recorded and leave the world unchanged.
pub fn run_episode<F>(world: &WorldSpec, task: &SimTask, source: Source, budget: usize, mut choose: F) -> Rollout
where
    F: FnMut(&UiState, &WorldState, usize) -> Action,
{
    let mut traj = Trajectory::new(task.task_id.clone(), task.goal.clone(), source);
    let mut state = world.initial_state();
    let mut invalid_actions = 0;
    for i in 0..budget {
        let ui = world.observe(&state);
        let action = choose(&ui, &state, i);
        match step(world, &state, &action) {
            Ok(next) => state = next,
            Err(e) => {
                log::debug!("{}: {e}", task.task_id);
                invalid_actions += 1;
            }
        }
        traj.push(ui, action);
        if state.stopped {
            break;
        }
    }
    let truncated = !state.stopped;
    if truncated {
        log::info!("{}: step budget of {budget} exhausted; trajectory kept truncated", task.task_id);
    }
    traj.env_feedback = Some(feedback(&state, task));
    Rollout { trajectory: traj, final_state: state, invalid_actions, truncated }
}

/// Replays a route exactly.
pub fn replay_route(world: &WorldSpec, task: &SimTask, route: &Route, source: Source) -> Rollout {
    let actions = route.actions.clone();
    run_episode(world, task, source, actions.len(), |_, _, i| actions[i].clone())
}

/// Expert demonstrations: route 0 of every training task.
pub fn expert_demos(world: &WorldSpec) -> Vec<Trajectory> {
    world
        .tasks
        .iter()
        .filter(|t| t.split == Split::Train)
        .filter_map(|t| t.routes.first().map(|r| replay_route(world, t, r, Source::Expert).trajectory))
        .collect()
}

/// Descriptions of each route's annotated key steps.
pub fn annotate_key_steps(world: &WorldSpec, task: &SimTask, table: &TemplateTable) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for r in &task.routes {
        let traj = replay_route(world, task, r, Source::Expert).trajectory;
        if let Ok(descs) = describe_trajectory(&traj, table) {
            out.extend(r.key_steps.iter().filter_map(|&i| descs.get(i)).map(|d| d.text.clone()));
        }
    }
    out
}
