//! Trajectories, UI states and actions over a fixed action space.
//!
//! A [`Trajectory`] is the ordered list of `(state, action)` steps an agent
//! took while pursuing a goal. Actions are modelled as an enum so that the
//! "exactly the fields demanded by the kind" rule holds by construction; the
//! JSON reader enforces it at the boundary and reports [`TrajectoryError::MalformedAction`].

mod describe;
mod jsonl;

pub use describe::{
    describe_trajectory, extract_description, SemanticDescription, TemplateTable,
};
pub use jsonl::{read_trajectories, read_trajectory, write_trajectory, write_trajectory_to};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("step {step}: target id '{target_id}' not present in state")]
    UnresolvedTarget { step: u32, target_id: String },
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid template table: {0}")]
    Template(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Bounding box in pixels: `(x, y, w, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl From<[u32; 4]> for BBox {
    fn from(v: [u32; 4]) -> Self {
        BBox { x: v[0], y: v[1], w: v[2], h: v[3] }
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub tag: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

impl Element {
    pub fn new(id: impl Into<String>, tag: impl Into<String>, text: impl Into<String>) -> Self {
        Element { id: id.into(), tag: tag.into(), text: text.into(), bbox: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UiState {
    #[serde(default)]
    pub elements: Vec<Element>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub app_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_ref: Option<String>,
}

impl UiState {
    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Down, Direction::Left, Direction::Right];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn parse(s: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    Hover,
    Type,
    Scroll,
    OpenApp,
    Navigate,
    Stop,
}

impl ActionKind {
    pub const ALL: [ActionKind; 7] = [
        ActionKind::Click,
        ActionKind::Hover,
        ActionKind::Type,
        ActionKind::Scroll,
        ActionKind::OpenApp,
        ActionKind::Navigate,
        ActionKind::Stop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Click => "click",
            ActionKind::Hover => "hover",
            ActionKind::Type => "type",
            ActionKind::Scroll => "scroll",
            ActionKind::OpenApp => "open_app",
            ActionKind::Navigate => "navigate",
            ActionKind::Stop => "stop",
        }
    }

    pub fn parse(s: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// One agent action. Each variant carries exactly the fields its kind needs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAction", into = "RawAction")]
pub enum Action {
    Click { target_id: String },
    Hover { target_id: String },
    Type { target_id: String, text: String },
    Scroll { direction: Direction },
    OpenApp { app: String },
    Navigate { url: String },
    Stop { answer: String },
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Click { .. } => ActionKind::Click,
            Action::Hover { .. } => ActionKind::Hover,
            Action::Type { .. } => ActionKind::Type,
            Action::Scroll { .. } => ActionKind::Scroll,
            Action::OpenApp { .. } => ActionKind::OpenApp,
            Action::Navigate { .. } => ActionKind::Navigate,
            Action::Stop { .. } => ActionKind::Stop,
        }
    }

    pub fn target_id(&self) -> Option<&str> {
        match self {
            Action::Click { target_id } | Action::Hover { target_id } | Action::Type { target_id, .. } => {
                Some(target_id)
            }
            _ => None,
        }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, Action::Stop { .. })
    }

    pub fn click(id: impl Into<String>) -> Self {
        Action::Click { target_id: id.into() }
    }

    pub fn type_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Action::Type { target_id: id.into(), text: text.into() }
    }

    pub fn stop(answer: impl Into<String>) -> Self {
        Action::Stop { answer: answer.into() }
    }
}

/// Wire shape of an action: every field optional, checked against `kind`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct RawAction {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    app: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    url: Option<String>,
}

impl TryFrom<RawAction> for Action {
    type Error = TrajectoryError;

    fn try_from(raw: RawAction) -> Result<Self, Self::Error> {
        let kind = ActionKind::parse(&raw.kind)
            .ok_or_else(|| TrajectoryError::MalformedAction(format!("unknown kind '{}'", raw.kind)))?;
        let present: Vec<(&str, bool)> = vec![
            ("target_id", raw.target_id.is_some()),
            ("text", raw.text.is_some()),
            ("answer", raw.answer.is_some()),
            ("direction", raw.direction.is_some()),
            ("app", raw.app.is_some()),
            ("url", raw.url.is_some()),
        ];
        let required: &[&str] = match kind {
            ActionKind::Click | ActionKind::Hover => &["target_id"],
            ActionKind::Type => &["target_id", "text"],
            ActionKind::Scroll => &["direction"],
            ActionKind::OpenApp => &["app"],
            ActionKind::Navigate => &["url"],
            ActionKind::Stop => &["answer"],
        };
        for (field, is_present) in present {
            let needed = required.contains(&field);
            if needed && !is_present {
                return Err(TrajectoryError::MalformedAction(format!(
                    "{} action requires '{}'",
                    kind.as_str(),
                    field
                )));
            }
            if !needed && is_present {
                return Err(TrajectoryError::MalformedAction(format!(
                    "{} action must not carry '{}'",
                    kind.as_str(),
                    field
                )));
            }
        }
        Ok(match kind {
            ActionKind::Click => Action::Click { target_id: raw.target_id.unwrap() },
            ActionKind::Hover => Action::Hover { target_id: raw.target_id.unwrap() },
            ActionKind::Type => Action::Type { target_id: raw.target_id.unwrap(), text: raw.text.unwrap() },
            ActionKind::Scroll => {
                let d = raw.direction.unwrap();
                let direction = Direction::parse(&d)
                    .ok_or_else(|| TrajectoryError::MalformedAction(format!("bad direction '{d}'")))?;
                Action::Scroll { direction }
            }
            ActionKind::OpenApp => Action::OpenApp { app: raw.app.unwrap() },
            ActionKind::Navigate => Action::Navigate { url: raw.url.unwrap() },
            ActionKind::Stop => Action::Stop { answer: raw.answer.unwrap() },
        })
    }
}

impl From<Action> for RawAction {
    fn from(a: Action) -> Self {
        let mut raw = RawAction { kind: a.kind().as_str().to_string(), ..Default::default() };
        match a {
            Action::Click { target_id } | Action::Hover { target_id } => raw.target_id = Some(target_id),
            Action::Type { target_id, text } => {
                raw.target_id = Some(target_id);
                raw.text = Some(text);
            }
            Action::Scroll { direction } => raw.direction = Some(direction.as_str().to_string()),
            Action::OpenApp { app } => raw.app = Some(app),
            Action::Navigate { url } => raw.url = Some(url),
            Action::Stop { answer } => raw.answer = Some(answer),
        }
        raw
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Step {
    pub t: u32,
    pub state: UiState,
    pub action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Expert,
    Sampled,
    PseudoExpert,
}

/// Serializes as a single object (`task_id`, `goal`, `source`,
/// `env_feedback`, `steps`); the line-per-step form lives in [`read_trajectories`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trajectory {
    pub task_id: String,
    pub goal: String,
    pub source: Source,
    /// Environment feedback bit; `None` when the trajectory has not been judged.
    #[serde(with = "jsonl::feedback_bit")]
    pub env_feedback: Option<bool>,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(task_id: impl Into<String>, goal: impl Into<String>, source: Source) -> Self {
        Trajectory { task_id: task_id.into(), goal: goal.into(), steps: Vec::new(), source, env_feedback: None }
    }

    /// Appends a step with the next 1-based index.
    pub fn push(&mut self, state: UiState, action: Action) {
        let t = self.steps.len() as u32 + 1;
        self.steps.push(Step { t, state, action });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> Option<&UiState> {
        self.steps.last().map(|s| &s.state)
    }

    pub fn stop_answer(&self) -> Option<&str> {
        self.steps.iter().rev().find_map(|s| match &s.action {
            Action::Stop { answer } => Some(answer.as_str()),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: Option<u32>,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(t) => write!(f, "step {t}: {} ({})", self.rule, self.detail),
            None => write!(f, "{} ({})", self.rule, self.detail),
        }
    }
}

/// Checks every trajectory, step, state and action invariant.
///
/// Rules: `step-index`, `stop-not-final`, `dup-element-id`, `empty-element-id`,
/// `bad-bbox`, `unresolved-target`, `expert-empty`.
pub fn validate_trajectory(traj: &Trajectory) -> Vec<Violation> {
    let mut out = Vec::new();
    if traj.steps.is_empty() && traj.source == Source::Expert {
        out.push(Violation { step: None, rule: "expert-empty", detail: "expert trajectory has no steps".into() });
    }
    let last = traj.steps.len();
    for (i, step) in traj.steps.iter().enumerate() {
        let expected = i as u32 + 1;
        if step.t != expected {
            out.push(Violation {
                step: Some(step.t),
                rule: "step-index",
                detail: format!("expected t={expected}, found t={}", step.t),
            });
        }
        if step.action.is_stop() && i + 1 != last {
            out.push(Violation {
                step: Some(step.t),
                rule: "stop-not-final",
                detail: format!("stop at step {} of {}", i + 1, last),
            });
        }
        let mut seen = HashSet::new();
        for el in &step.state.elements {
            if el.id.is_empty() {
                out.push(Violation { step: Some(step.t), rule: "empty-element-id", detail: format!("tag {}", el.tag) });
            } else if !seen.insert(el.id.as_str()) {
                out.push(Violation { step: Some(step.t), rule: "dup-element-id", detail: format!("id {}", el.id) });
            }
            if let Some(b) = el.bbox {
                if b.w == 0 || b.h == 0 {
                    out.push(Violation { step: Some(step.t), rule: "bad-bbox", detail: format!("id {}", el.id) });
                }
            }
        }
        if let Some(id) = step.action.target_id() {
            if step.state.element(id).is_none() {
                out.push(Violation {
                    step: Some(step.t),
                    rule: "unresolved-target",
                    detail: format!("target {id}"),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shop_state() -> UiState {
        UiState {
            elements: vec![Element::new("42", "A", "Add to Wish List"), Element::new("7", "INPUT", "Search")],
            url: Some("http://shop.local/p/1".into()),
            ..Default::default()
        }
    }

    fn five_step(stop_at: usize) -> Trajectory {
        let mut t = Trajectory::new("t1", "goal", Source::Sampled);
        for i in 0..5 {
            let a = if i == stop_at { Action::stop("") } else { Action::click("42") };
            t.push(shop_state(), a);
        }
        t
    }

    #[test]
    fn well_formed_has_no_violations() {
        assert!(validate_trajectory(&five_step(4)).is_empty());
    }

    #[test]
    fn early_stop_is_flagged() {
        let v = validate_trajectory(&five_step(1));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "stop-not-final");
        assert_eq!(v[0].step, Some(2));
    }

    #[test]
    fn duplicate_ids_are_flagged() {
        let mut t = Trajectory::new("t1", "g", Source::Sampled);
        let mut s = shop_state();
        s.elements.push(Element::new("42", "BUTTON", "Other"));
        t.push(s, Action::stop(""));
        let v = validate_trajectory(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "dup-element-id");
    }

    #[test]
    fn empty_expert_is_invalid_but_empty_sample_is_not() {
        assert_eq!(validate_trajectory(&Trajectory::new("a", "g", Source::Expert))[0].rule, "expert-empty");
        assert!(validate_trajectory(&Trajectory::new("a", "g", Source::Sampled)).is_empty());
    }

    #[test]
    fn raw_action_field_rules() {
        let ok: Action = serde_json::from_str(r#"{"kind":"type","target_id":"7","text":"Clock"}"#).unwrap();
        assert_eq!(ok, Action::type_text("7", "Clock"));
        let missing = serde_json::from_str::<Action>(r#"{"kind":"type","target_id":"7"}"#);
        assert!(missing.unwrap_err().to_string().contains("requires 'text'"));
        let extra = serde_json::from_str::<Action>(r#"{"kind":"click","target_id":"7","answer":"x"}"#);
        assert!(extra.unwrap_err().to_string().contains("must not carry 'answer'"));
        assert!(serde_json::from_str::<Action>(r#"{"kind":"fly"}"#).is_err());
    }
}
