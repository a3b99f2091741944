//! Builtin predicate APIs. Every predicate scans the whole trajectory and
//! reports the earliest 1-based step at which it holds.

use std::collections::BTreeMap;

use super::{normalize_text, DslError};
use crate::trajectory::{Action, ActionKind, Direction, Element, Step, Trajectory};

/// Element tag carried by wishlist entries rendered into a state.
pub const WISHLIST_TAG: &str = "WISHLIST_ITEM";

/// Tag argument accepted by `validate_click_or_hover_action` as "any tag".
pub const ANY_TAG: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Str,
    Enum(&'static [&'static str]),
}

pub type PredicateFn = fn(&[String], &Trajectory) -> Result<Option<u32>, PredicateFailure>;

/// Raised by a predicate that cannot inspect a step it needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateFailure {
    pub step: u32,
    pub reason: String,
}

#[derive(Clone)]
pub struct ApiSignature {
    pub name: &'static str,
    pub params: &'static [(&'static str, ArgKind)],
    pub doc: &'static str,
    pub eval: PredicateFn,
}

impl std::fmt::Debug for ApiSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ApiSignature").field("name", &self.name).field("params", &self.params).finish()
    }
}

impl ApiSignature {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// Python-style signature line used in synthesis prompts.
    pub fn prompt_line(&self) -> String {
        let params: Vec<&str> = self.params.iter().map(|(n, _)| *n).collect();
        format!("{}(trajectory, {}): {}", self.name, params.join(", "), self.doc)
    }
}

/// Immutable map from API name to signature and evaluator.
#[derive(Debug, Clone)]
pub struct ApiRegistry {
    entries: BTreeMap<&'static str, ApiSignature>,
}

const CLICK_OR_HOVER: &[&str] = &["click", "hover"];
const DIRECTIONS: &[&str] = &["up", "down", "left", "right"];

impl ApiRegistry {
    pub fn builtin() -> Self {
        let sigs = [
            ApiSignature {
                name: "validate_click_action",
                params: &[("text", ArgKind::Str)],
                doc: "a click on an element whose text equals `text`",
                eval: click_action,
            },
            ApiSignature {
                name: "validate_click_or_hover_action",
                params: &[("kind", ArgKind::Enum(CLICK_OR_HOVER)), ("tag", ArgKind::Str), ("text", ArgKind::Str)],
                doc: "a click or hover on an element with the given tag ('*' for any) and text",
                eval: click_or_hover_action,
            },
            ApiSignature {
                name: "validate_type_action",
                params: &[("text", ArgKind::Str), ("target_text_field", ArgKind::Str)],
                doc: "typing `text` into the element whose text is `target_text_field`",
                eval: type_action,
            },
            ApiSignature {
                name: "validate_stop_action",
                params: &[("answer", ArgKind::Str)],
                doc: "a stop action with exactly this answer",
                eval: stop_action,
            },
            ApiSignature {
                name: "validate_item_in_wishlist",
                params: &[("item_text", ArgKind::Str)],
                doc: "a state showing `item_text` in the wishlist",
                eval: item_in_wishlist,
            },
            ApiSignature {
                name: "validate_scroll_action",
                params: &[("direction", ArgKind::Enum(DIRECTIONS))],
                doc: "a scroll in the given direction",
                eval: scroll_action,
            },
            ApiSignature {
                name: "validate_open_app",
                params: &[("app_name", ArgKind::Str)],
                doc: "opening the named app",
                eval: open_app,
            },
            ApiSignature {
                name: "validate_navigate",
                params: &[("url_substring", ArgKind::Str)],
                doc: "navigating to, or being on, a URL containing `url_substring`",
                eval: navigate,
            },
        ];
        ApiRegistry { entries: sigs.into_iter().map(|s| (s.name, s)).collect() }
    }

    pub fn get(&self, name: &str) -> Option<&ApiSignature> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn signatures(&self) -> impl Iterator<Item = &ApiSignature> {
        self.entries.values()
    }

    /// The `<<API_FUNCTIONS>>` block of the synthesis prompt.
    pub fn prompt_listing(&self) -> String {
        self.signatures().map(|s| format!("- {}", s.prompt_line())).collect::<Vec<_>>().join("\n")
    }

    pub(crate) fn check_args(&self, api: &str, args: &[String]) -> Result<(), DslError> {
        let sig = self.get(api).ok_or_else(|| DslError::UnknownApi { line: 0, api: api.to_string() })?;
        if sig.arity() != args.len() {
            return Err(DslError::ArityMismatch {
                line: 0,
                api: api.to_string(),
                expected: sig.arity(),
                found: args.len(),
            });
        }
        Ok(())
    }
}

impl Default for ApiRegistry {
    fn default() -> Self {
        ApiRegistry::builtin()
    }
}

fn same(a: &str, b: &str) -> bool {
    normalize_text(a) == normalize_text(b)
}

fn referent<'a>(step: &'a Step, id: &str) -> Result<&'a Element, PredicateFailure> {
    step.state.element(id).ok_or_else(|| PredicateFailure {
        step: step.t,
        reason: format!("target id '{id}' missing from state"),
    })
}

fn first_step<F>(traj: &Trajectory, mut pred: F) -> Result<Option<u32>, PredicateFailure>
where
    F: FnMut(&Step) -> Result<bool, PredicateFailure>,
{
    for step in &traj.steps {
        if pred(step)? {
            return Ok(Some(step.t));
        }
    }
    Ok(None)
}

fn click_action(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    first_step(traj, |s| match &s.action {
        Action::Click { target_id } => Ok(same(&referent(s, target_id)?.text, &args[0])),
        _ => Ok(false),
    })
}

fn click_or_hover_action(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    let want = if args[0] == "click" { ActionKind::Click } else { ActionKind::Hover };
    let tag = normalize_text(&args[1]);
    first_step(traj, |s| {
        if s.action.kind() != want {
            return Ok(false);
        }
        let el = referent(s, s.action.target_id().unwrap_or_default())?;
        Ok((tag == ANY_TAG || normalize_text(&el.tag) == tag) && same(&el.text, &args[2]))
    })
}

fn type_action(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    first_step(traj, |s| match &s.action {
        Action::Type { target_id, text } => Ok(same(text, &args[0]) && same(&referent(s, target_id)?.text, &args[1])),
        _ => Ok(false),
    })
}

fn stop_action(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    first_step(traj, |s| Ok(matches!(&s.action, Action::Stop { answer } if same(answer, &args[0]))))
}

fn item_in_wishlist(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    first_step(traj, |s| Ok(s.state.elements.iter().any(|e| e.tag == WISHLIST_TAG && same(&e.text, &args[0]))))
}

fn scroll_action(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    let dir = Direction::parse(&args[0]);
    first_step(traj, |s| Ok(matches!(&s.action, Action::Scroll { direction } if Some(*direction) == dir)))
}

fn open_app(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    first_step(traj, |s| Ok(matches!(&s.action, Action::OpenApp { app } if same(app, &args[0]))))
}

fn navigate(args: &[String], traj: &Trajectory) -> Result<Option<u32>, PredicateFailure> {
    let needle = normalize_text(&args[0]);
    first_step(traj, |s| {
        let by_action = matches!(&s.action, Action::Navigate { url } if url.contains(needle.as_str()));
        let by_state = s.state.url.as_deref().is_some_and(|u| u.contains(needle.as_str()));
        Ok(by_action || by_state)
    })
}
