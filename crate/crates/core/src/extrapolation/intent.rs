use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ExtrapolationError;
use crate::lexicon::{tokens, Lexicon};
use crate::llm::{ChatModel, ChatRequest};
use crate::trajectory::{TemplateTable, Trajectory};

const GENERATION_PROMPT: &str = include_str!("../../data/prompts/intent_generation.txt");
const REFINEMENT_PROMPT: &str = include_str!("../../data/prompts/intent_refinement.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentCandidate {
    pub raw: String,
    pub refined: Option<String>,
    pub verdict: Verdict,
    /// The rule that rewrote (accepted) or rejected (invalid) the candidate.
    pub rule_fired: Option<String>,
}

impl IntentCandidate {
    pub fn raw(raw: impl Into<String>) -> Self {
        IntentCandidate { raw: raw.into(), refined: None, verdict: Verdict::Invalid, rule_fired: None }
    }
}

/// Proposes a task intent that a trajectory accomplishes.
pub trait IntentOracle: Send + Sync {
    fn infer(&self, traj: &Trajectory) -> Result<String, ExtrapolationError>;
}

/// Optional model pass over an intent that already survived the rules.
/// Returning `None` means the model judged it invalid.
pub trait IntentRewriter: Send + Sync {
    fn rewrite(&self, intent: &str) -> Result<Option<String>, ExtrapolationError>;
}

/// Template-based intent: the stop answer if there is one, otherwise the
/// last non-stop step.
#[derive(Debug, Clone, Default)]
pub struct MockIntent {
    pub table: TemplateTable,
}

impl IntentOracle for MockIntent {
    fn infer(&self, traj: &Trajectory) -> Result<String, ExtrapolationError> {
        if let Some(answer) = traj.stop_answer().filter(|a| !a.trim().is_empty()) {
            return Ok(format!("Answer '{answer}' for the observed page"));
        }
        traj.steps
            .iter()
            .rev()
            .filter(|s| !s.action.is_stop())
            .find_map(|s| self.table.describe(s).ok())
            .map(|d| format!("Perform: {}", d.text))
            .ok_or_else(|| ExtrapolationError::OracleUnavailable("trajectory has no describable step".into()))
    }
}

pub struct LlmIntent {
    pub chat: Arc<dyn ChatModel>,
    pub model: String,
    pub table: TemplateTable,
}

impl IntentOracle for LlmIntent {
    fn infer(&self, traj: &Trajectory) -> Result<String, ExtrapolationError> {
        if traj.is_empty() {
            return Err(ExtrapolationError::OracleUnavailable("empty trajectory".into()));
        }
        let lines: Vec<String> = traj
            .steps
            .iter()
            .filter_map(|s| self.table.describe(s).ok())
            .enumerate()
            .map(|(i, d)| format!("{}. {}", i + 1, d.text))
            .collect();
        let prompt = GENERATION_PROMPT.replace("<<TRAJECTORY>>", &lines.join("\n"));
        self.chat
            .chat(&ChatRequest::user(&self.model, prompt))
            .map(|r| r.text.trim().to_string())
            .map_err(|e| ExtrapolationError::OracleUnavailable(e.to_string()))
    }
}

pub struct LlmRewriter {
    pub chat: Arc<dyn ChatModel>,
    pub model: String,
    pub examples: String,
}

impl IntentRewriter for LlmRewriter {
    fn rewrite(&self, intent: &str) -> Result<Option<String>, ExtrapolationError> {
        let prompt = REFINEMENT_PROMPT.replace("<<EXAMPLES>>", &self.examples).replace("<<CANDIDATE>>", intent);
        let reply = self
            .chat
            .chat(&ChatRequest::user(&self.model, prompt))
            .map_err(|e| ExtrapolationError::OracleUnavailable(e.to_string()))?;
        let text = reply.text.trim().trim_matches('`').trim().to_string();
        Ok(if text == "INVALID" { None } else { Some(text) })
    }
}

/// The mechanical refinement rules and their word lists.
#[derive(Debug, Clone)]
pub struct RuleSet {
    pub lexicon: Lexicon,
    pub forbidden_prefixes: Vec<String>,
    pub placeholders: Vec<String>,
    pub denylist: Vec<String>,
    pub negation_verbs: Vec<String>,
    pub min_object_tokens: usize,
}

impl Default for RuleSet {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        RuleSet {
            lexicon: Lexicon::default(),
            forbidden_prefixes: v(&["The task intent is", "The task is", "New task intent:", "Task intent:", "This intent"]),
            placeholders: v(&["INVALID", "OBSERVATION:", "N/A", "None"]),
            denylist: v(&["Add to cart", "Stop", "Go back", "Compare the prices of the products"]),
            negation_verbs: v(&["stop", "cancel", "prevent"]),
            min_object_tokens: 2,
        }
    }
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

impl RuleSet {
    /// R1: removes label-like prefixes. Returns the cleaned text and whether
    /// anything changed.
    fn r1(&self, text: &str) -> (String, bool) {
        let mut s = text.trim();
        let mut changed = false;
        loop {
            let before = s;
            for p in &self.forbidden_prefixes {
                if let Some(rest) = strip_prefix_ci(s, p) {
                    s = rest.trim_start_matches([':', ',', '-']).trim_start();
                    if let Some(rest) = strip_prefix_ci(s, "to ") {
                        s = rest.trim_start();
                    }
                }
            }
            if s == before {
                break;
            }
            changed = true;
        }
        if changed {
            (capitalize(s.trim()), true)
        } else {
            (s.to_string(), false)
        }
    }

    /// First rule among R2–R4 that rejects `text`.
    fn reject(&self, text: &str) -> Option<&'static str> {
        let t = text.trim();
        let is_placeholder = t.is_empty()
            || !t.chars().any(char::is_alphanumeric)
            || self.placeholders.iter().any(|p| {
                t.eq_ignore_ascii_case(p) || (p.ends_with(':') && strip_prefix_ci(t, p).is_some())
            });
        if is_placeholder {
            return Some("R2");
        }
        let bare = t.trim_end_matches(['.', '!', '?']).trim();
        if self.denylist.iter().any(|d| d.eq_ignore_ascii_case(bare)) {
            return Some("R3");
        }
        let toks = tokens(t);
        let Some(verb) = toks.first() else { return Some("R2") };
        if !self.lexicon.is_verb(verb) {
            return Some("R3");
        }
        let objects = toks[1..].iter().filter(|w| !self.lexicon.is_stopword(w)).count();
        if objects < self.min_object_tokens {
            return Some("R3");
        }
        if self.negation_verbs.iter().any(|n| n == verb) {
            return Some("R4");
        }
        None
    }
}

/// Infers a raw intent for a (failed) trajectory.
pub fn infer_intent(traj: &Trajectory, oracle: &dyn IntentOracle) -> Result<IntentCandidate, ExtrapolationError> {
    if traj.is_empty() {
        return Err(ExtrapolationError::OracleUnavailable("empty trajectory".into()));
    }
    Ok(IntentCandidate::raw(oracle.infer(traj)?))
}

/// Runs the rules (and the optional rewriter, whose output goes back through
/// the rules). Works from `refined` when present, so re-refining an accepted
/// candidate returns it unchanged.
pub fn refine_intent(c: &IntentCandidate, rules: &RuleSet, rewriter: Option<&dyn IntentRewriter>) -> IntentCandidate {
    let input = c.refined.clone().unwrap_or_else(|| c.raw.clone());
    let invalid = |rule: &str| IntentCandidate {
        raw: c.raw.clone(),
        refined: None,
        verdict: Verdict::Invalid,
        rule_fired: Some(rule.to_string()),
    };
    let (mut text, mut rewrote) = rules.r1(&input);
    if let Some(rule) = rules.reject(&text) {
        return invalid(rule);
    }
    if let Some(rw) = rewriter {
        match rw.rewrite(&text) {
            Ok(Some(out)) => {
                let (again, r1) = rules.r1(&out);
                if let Some(rule) = rules.reject(&again) {
                    return invalid(rule);
                }
                rewrote |= r1;
                text = again;
            }
            Ok(None) => return invalid("llm"),
            Err(e) => log::warn!("intent rewriter failed, keeping rule output: {e}"),
        }
    }
    let rule_fired = if rewrote { Some("R1".to_string()) } else { c.rule_fired.clone().filter(|_| c.refined.is_some()) };
    IntentCandidate { raw: c.raw.clone(), refined: Some(text), verdict: Verdict::Accepted, rule_fired }
}
