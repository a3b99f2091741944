use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Action, ActionKind, Step, Trajectory, TrajectoryError};

const BUILTIN_TEMPLATES: &str = include_str!("../../data/templates.json");

/// Natural-language rendering of one step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticDescription {
    pub step_t: u32,
    pub text: String,
}

#[derive(Debug, Clone, Deserialize)]
struct KindTemplate {
    known: String,
    #[serde(default)]
    unknown: Option<String>,
}

/// Per-kind sentence templates plus the tag → word mapping.
///
/// Placeholders: `{tag_word}`, `{text}` (referent element text), `{input}`
/// (typed text), `{answer}`, `{direction}`, `{app}`, `{url}`.
#[derive(Debug, Clone, Deserialize)]
pub struct TemplateTable {
    pub version: u32,
    tag_words: BTreeMap<String, String>,
    unknown_tag_word: String,
    templates: BTreeMap<String, KindTemplate>,
}

impl Default for TemplateTable {
    fn default() -> Self {
        TemplateTable::from_json(BUILTIN_TEMPLATES).expect("builtin template table is valid")
    }
}

impl TemplateTable {
    pub fn from_json(text: &str) -> Result<Self, TrajectoryError> {
        let table: TemplateTable =
            serde_json::from_str(text).map_err(|e| TrajectoryError::Template(e.to_string()))?;
        for kind in ActionKind::ALL {
            if !table.templates.contains_key(kind.as_str()) {
                return Err(TrajectoryError::Template(format!("no template for kind '{}'", kind.as_str())));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, TrajectoryError> {
        TemplateTable::from_json(&std::fs::read_to_string(path)?)
    }

    /// Human word for a role tag, `None` for tags outside the table.
    pub fn tag_word(&self, tag: &str) -> Option<&str> {
        self.tag_words.get(tag).map(String::as_str)
    }

    /// Inverse of [`tag_word`](Self::tag_word).
    pub fn tag_for_word(&self, word: &str) -> Option<&str> {
        self.tag_words.iter().find(|(_, w)| w.as_str() == word).map(|(t, _)| t.as_str())
    }

    pub fn unknown_tag_word(&self) -> &str {
        &self.unknown_tag_word
    }

    pub fn tag_words(&self) -> impl Iterator<Item = (&str, &str)> {
        self.tag_words.iter().map(|(t, w)| (t.as_str(), w.as_str()))
    }

    /// Raw template string for a kind; `unknown_tag` selects the degraded
    /// variant when the kind has one.
    pub fn template(&self, kind: ActionKind, unknown_tag: bool) -> &str {
        let t = &self.templates[kind.as_str()];
        match (&t.unknown, unknown_tag) {
            (Some(u), true) => u,
            _ => &t.known,
        }
    }

    /// Literal text before the first placeholder of the stop template.
    pub fn stop_prefix(&self) -> &str {
        let t = self.template(ActionKind::Stop, false);
        t.split('{').next().unwrap_or(t)
    }

    pub fn describe(&self, step: &Step) -> Result<SemanticDescription, TrajectoryError> {
        let resolve = |id: &str| {
            step.state.element(id).ok_or_else(|| TrajectoryError::UnresolvedTarget {
                step: step.t,
                target_id: id.to_string(),
            })
        };
        let mut vars: Vec<(&str, String)> = Vec::new();
        let mut unknown_tag = false;
        match &step.action {
            Action::Click { target_id } | Action::Hover { target_id } => {
                let el = resolve(target_id)?;
                let word = self.tag_word(&el.tag);
                unknown_tag = word.is_none();
                vars.push(("tag_word", word.unwrap_or(&self.unknown_tag_word).to_string()));
                vars.push(("text", el.text.clone()));
            }
            Action::Type { target_id, text } => {
                let el = resolve(target_id)?;
                let word = self.tag_word(&el.tag);
                unknown_tag = word.is_none();
                vars.push(("tag_word", word.unwrap_or(&self.unknown_tag_word).to_string()));
                vars.push(("text", el.text.clone()));
                vars.push(("input", text.clone()));
            }
            Action::Scroll { direction } => vars.push(("direction", direction.as_str().to_string())),
            Action::OpenApp { app } => vars.push(("app", app.clone())),
            Action::Navigate { url } => vars.push(("url", url.clone())),
            Action::Stop { answer } => vars.push(("answer", answer.clone())),
        }
        let text = render(self.template(step.action.kind(), unknown_tag), &vars);
        Ok(SemanticDescription { step_t: step.t, text })
    }
}

/// Single-pass placeholder substitution; substituted values are never re-scanned.
fn render(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                let name = &after[..close];
                match vars.iter().find(|(k, _)| *k == name) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(name);
                        out.push('}');
                    }
                }
                rest = &after[close + 1..];
            }
            None => {
                out.push_str(&rest[open..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Describes one step with the builtin template table.
pub fn extract_description(step: &Step) -> Result<SemanticDescription, TrajectoryError> {
    TemplateTable::default().describe(step)
}

/// One description per step, in step order.
pub fn describe_trajectory(
    traj: &Trajectory,
    table: &TemplateTable,
) -> Result<Vec<SemanticDescription>, TrajectoryError> {
    traj.steps.iter().map(|s| table.describe(s)).collect()
}
