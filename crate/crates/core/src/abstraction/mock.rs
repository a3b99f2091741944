//! Deterministic stand-ins for the two model calls of the abstraction step.

use std::collections::BTreeSet;

use regex::Regex;

use super::{AbstractionError, KeyStepOracle, KeyStepSelection, SynthOracle};
use crate::dsl::registry::ANY_TAG;
use crate::dsl::{print_label_function, LabelFunction, Origin, PredicateCall};
use crate::lexicon::{tokens, Lexicon};
use crate::trajectory::{ActionKind, Direction, SemanticDescription, TemplateTable};

/// Words that every description of a kind shares (template text and tag
/// words); they carry no information about the task.
fn scaffold_words(table: &TemplateTable) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for kind in ActionKind::ALL {
        for unknown in [false, true] {
            let t = table.template(kind, unknown);
            let literal: String = strip_placeholders(t);
            out.extend(tokens(&literal));
        }
    }
    for (_, w) in table.tag_words() {
        out.extend(tokens(w));
    }
    out.extend(tokens(table.unknown_tag_word()));
    out
}

fn strip_placeholders(t: &str) -> String {
    let mut s = String::new();
    let mut depth = 0;
    for c in t.chars() {
        match c {
            '{' => depth += 1,
            '}' if depth > 0 => {
                depth -= 1;
                s.push(' ');
            }
            c if depth == 0 => s.push(c),
            _ => {}
        }
    }
    s
}

/// Token-overlap key-step selector.
#[derive(Debug, Clone)]
pub struct MockKeySteps {
    lexicon: Lexicon,
    scaffold: BTreeSet<String>,
    stop_prefix: String,
}

impl Default for MockKeySteps {
    fn default() -> Self {
        MockKeySteps::new(Lexicon::default(), &TemplateTable::default())
    }
}

impl MockKeySteps {
    pub fn new(lexicon: Lexicon, table: &TemplateTable) -> Self {
        MockKeySteps { lexicon, scaffold: scaffold_words(table), stop_prefix: table.stop_prefix().to_string() }
    }

    fn content(&self, s: &str) -> BTreeSet<String> {
        self.lexicon.content_tokens(s).into_iter().filter(|t| !self.scaffold.contains(t)).collect()
    }

    pub fn select(&self, descs: &[SemanticDescription], goal: &str) -> KeyStepSelection {
        let goal_tokens = self.content(goal);
        let selected = descs
            .iter()
            .filter(|d| d.text.starts_with(&self.stop_prefix) || !self.content(&d.text).is_disjoint(&goal_tokens))
            .cloned()
            .collect();
        KeyStepSelection { selected, oracle_name: "mock".into(), raw_response: None }
    }
}

impl KeyStepOracle for MockKeySteps {
    fn name(&self) -> &str {
        "mock"
    }

    fn select(&self, descs: &[SemanticDescription], goal: &str) -> Result<KeyStepSelection, AbstractionError> {
        Ok(MockKeySteps::select(self, descs, goal))
    }
}

/// Selects steps sharing a content token with the goal, plus any stop step.
pub fn mock_key_step_heuristic(descs: &[SemanticDescription], goal: &str) -> KeyStepSelection {
    MockKeySteps::default().select(descs, goal)
}

struct Pattern {
    kind: ActionKind,
    unknown_tag: bool,
    re: Regex,
}

/// Inverts the description templates into one-guard label functions.
pub struct MockSynth {
    table: TemplateTable,
    patterns: Vec<Pattern>,
}

impl Default for MockSynth {
    fn default() -> Self {
        MockSynth::new(TemplateTable::default())
    }
}

fn alternation<'a>(words: impl IntoIterator<Item = &'a str>) -> String {
    let mut ws: Vec<&str> = words.into_iter().collect();
    // Longest first so that e.g. "text field" wins over a hypothetical "text".
    ws.sort_by_key(|w| std::cmp::Reverse(w.len()));
    ws.iter().map(|w| regex::escape(w)).collect::<Vec<_>>().join("|")
}

fn template_regex(template: &str, table: &TemplateTable) -> Regex {
    let mut pat = String::from("(?s)^");
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        pat.push_str(&regex::escape(&rest[..open]));
        let close = rest[open..].find('}').map(|c| open + c).expect("templates are validated");
        let name = &rest[open + 1..close];
        let group = match name {
            "tag_word" => alternation(table.tag_words().map(|(_, w)| w)),
            "direction" => alternation(Direction::ALL.iter().map(|d| d.as_str())),
            _ => ".*".to_string(),
        };
        pat.push_str(&format!("(?P<{name}>{group})"));
        rest = &rest[close + 1..];
    }
    pat.push_str(&regex::escape(rest));
    pat.push('$');
    Regex::new(&pat).expect("template regex compiles")
}

impl MockSynth {
    pub fn new(table: TemplateTable) -> Self {
        let mut patterns = Vec::new();
        for kind in ActionKind::ALL {
            let known = table.template(kind, false).to_string();
            let unknown = table.template(kind, true).to_string();
            if unknown != known {
                patterns.push(Pattern { kind, unknown_tag: true, re: template_regex(&unknown, &table) });
            }
            patterns.push(Pattern { kind, unknown_tag: false, re: template_regex(&known, &table) });
        }
        MockSynth { table, patterns }
    }

    /// The guard a templated description denotes.
    pub fn guard_for(&self, text: &str) -> Result<PredicateCall, AbstractionError> {
        for p in &self.patterns {
            let Some(caps) = p.re.captures(text) else { continue };
            let get = |n: &str| caps.name(n).map(|m| m.as_str().to_string()).unwrap_or_default();
            let tag = || {
                if p.unknown_tag {
                    ANY_TAG.to_string()
                } else {
                    self.table.tag_for_word(&get("tag_word")).unwrap_or(ANY_TAG).to_string()
                }
            };
            let call = match p.kind {
                ActionKind::Click if p.unknown_tag => PredicateCall::new("validate_click_action", [get("text")]),
                ActionKind::Click => PredicateCall::new("validate_click_or_hover_action", ["click".into(), tag(), get("text")]),
                ActionKind::Hover => PredicateCall::new("validate_click_or_hover_action", ["hover".into(), tag(), get("text")]),
                ActionKind::Type => PredicateCall::new("validate_type_action", [get("input"), get("text")]),
                ActionKind::Scroll => PredicateCall::new("validate_scroll_action", [get("direction")]),
                ActionKind::OpenApp => PredicateCall::new("validate_open_app", [get("app")]),
                ActionKind::Navigate => PredicateCall::new("validate_navigate", [get("url")]),
                ActionKind::Stop => PredicateCall::new("validate_stop_action", [get("answer")]),
            };
            return Ok(call);
        }
        Err(AbstractionError::UnrecognizedTemplate(text.to_string()))
    }

    /// Canonical DSL text of the one-guard label function for `desc`.
    pub fn synthesize(&self, desc: &SemanticDescription) -> Result<String, AbstractionError> {
        let guard = self.guard_for(&desc.text)?;
        let lf = LabelFunction::new(vec![guard], Origin::Mock).expect("one guard");
        Ok(print_label_function(&lf))
    }
}

impl SynthOracle for MockSynth {
    fn name(&self) -> &str {
        "mock"
    }

    fn propose(&self, desc: &SemanticDescription, _attempt: u32) -> Result<String, AbstractionError> {
        self.synthesize(desc)
    }
}

/// Mock synthesis with the builtin templates.
pub fn mock_synthesizer(desc: &SemanticDescription) -> Result<String, AbstractionError> {
    MockSynth::default().synthesize(desc)
}
