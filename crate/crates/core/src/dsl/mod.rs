//! Label functions: ordered conjunctions of predicate calls.
//!
//! Concrete syntax (`.lf` files):
//!
//! ```text
//! fn verify(trajectory):
//!   require validate_click_action("Pro Expense")
//!   require validate_stop_action("")
//! ```
//!
//! A label function passes a trajectory iff every guard finds a matching step
//! somewhere in it. Guards are independent; ordering constraints live in the
//! strategy graph.

mod parse;
pub mod registry;

pub use parse::{parse_label_function, print_label_function};
pub use registry::{ApiRegistry, ApiSignature, ArgKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("line {line}: unknown api '{api}'")]
    UnknownApi { line: usize, api: String },
    #[error("line {line}: {api} takes {expected} argument(s), found {found}")]
    ArityMismatch { line: usize, api: String, expected: usize, found: usize },
    #[error("label function has no guards")]
    EmptyBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("guard {guard_index} failed at step {step}: {reason}")]
pub struct PredicateRuntimeError {
    pub guard_index: usize,
    pub step: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredicateCall {
    pub api: String,
    pub args: Vec<String>,
}

impl PredicateCall {
    pub fn new<I, S>(api: impl Into<String>, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PredicateCall { api: api.into(), args: args.into_iter().map(Into::into).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Expert,
    Expansion,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelFunction {
    pub guards: Vec<PredicateCall>,
    pub origin: Origin,
    pub source_desc: Option<String>,
}

impl LabelFunction {
    pub fn new(guards: Vec<PredicateCall>, origin: Origin) -> Result<Self, DslError> {
        if guards.is_empty() {
            return Err(DslError::EmptyBody);
        }
        Ok(LabelFunction { guards, origin, source_desc: None })
    }

    /// Checks every guard against the registry.
    pub fn validate(&self, registry: &ApiRegistry) -> Result<(), DslError> {
        if self.guards.is_empty() {
            return Err(DslError::EmptyBody);
        }
        for g in &self.guards {
            registry.check_args(&g.api, &g.args)?;
        }
        Ok(())
    }

    /// Guard-sequence equality after canonicalization; the identity used for
    /// merging strategy-graph vertices.
    pub fn same_canonical(&self, other: &LabelFunction) -> bool {
        canonical_guards(&self.guards) == canonical_guards(&other.guards)
    }

    pub fn to_text(&self) -> String {
        print_label_function(self)
    }
}

/// NFC-normalizes and trims a string argument.
pub fn normalize_text(s: &str) -> String {
    s.nfc().collect::<String>().trim().to_string()
}

pub(crate) fn canonical_guards(guards: &[PredicateCall]) -> Vec<PredicateCall> {
    guards
        .iter()
        .map(|g| PredicateCall { api: g.api.clone(), args: g.args.iter().map(|a| normalize_text(a)).collect() })
        .collect()
}

/// Normal form: string arguments NFC-normalized and trimmed, guard order kept.
pub fn canonicalize(lf: &LabelFunction) -> LabelFunction {
    LabelFunction { guards: canonical_guards(&lf.guards), origin: lf.origin, source_desc: lf.source_desc.clone() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalResult {
    pub passed: bool,
    pub first_fail_index: Option<usize>,
    /// Earliest matching step per guard. Guards after the first failure are
    /// not evaluated and stay `None`.
    pub match_steps: Vec<Option<u32>>,
}

impl EvalResult {
    /// Step at which the last guard was satisfied, when the function passed.
    pub fn completion_step(&self) -> Option<u32> {
        if !self.passed {
            return None;
        }
        self.match_steps.iter().flatten().copied().max()
    }
}

/// Earliest step at which a single predicate holds.
pub fn evaluate_predicate(
    call: &PredicateCall,
    traj: &Trajectory,
    registry: &ApiRegistry,
) -> Result<Option<u32>, PredicateRuntimeError> {
    evaluate_guard(0, call, traj, registry)
}

fn evaluate_guard(
    index: usize,
    call: &PredicateCall,
    traj: &Trajectory,
    registry: &ApiRegistry,
) -> Result<Option<u32>, PredicateRuntimeError> {
    let sig = registry.get(&call.api).ok_or_else(|| PredicateRuntimeError {
        guard_index: index,
        step: 0,
        reason: format!("unknown api '{}'", call.api),
    })?;
    if sig.arity() != call.args.len() {
        return Err(PredicateRuntimeError {
            guard_index: index,
            step: 0,
            reason: format!("{} expects {} args", call.api, sig.arity()),
        });
    }
    (sig.eval)(&call.args, traj).map_err(|f| PredicateRuntimeError { guard_index: index, step: f.step, reason: f.reason })
}

/// Runs the guards in order, stopping at the first that finds no match.
pub fn evaluate(
    lf: &LabelFunction,
    traj: &Trajectory,
    registry: &ApiRegistry,
) -> Result<EvalResult, PredicateRuntimeError> {
    let mut match_steps = vec![None; lf.guards.len()];
    for (i, guard) in lf.guards.iter().enumerate() {
        match evaluate_guard(i, guard, traj, registry)? {
            Some(t) => match_steps[i] = Some(t),
            None => return Ok(EvalResult { passed: false, first_fail_index: Some(i), match_steps }),
        }
    }
    Ok(EvalResult { passed: true, first_fail_index: None, match_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Action, Element, Source, UiState};

    fn reg() -> ApiRegistry {
        ApiRegistry::builtin()
    }

    fn lf(guards: Vec<PredicateCall>) -> LabelFunction {
        LabelFunction::new(guards, Origin::Expert).unwrap()
    }

    fn stop_traj(answer: &str) -> Trajectory {
        let mut t = Trajectory::new("t", "g", Source::Sampled);
        t.push(
            UiState { elements: vec![Element::new("1", "DIV", "Pro Expense")], ..Default::default() },
            Action::click("1"),
        );
        t.push(UiState::default(), Action::stop(answer));
        t
    }

    #[test]
    fn stop_answer_passes() {
        let f = lf(vec![PredicateCall::new("validate_stop_action", ["4200 calories"])]);
        let r = evaluate(&f, &stop_traj("4200 calories"), &reg()).unwrap();
        assert!(r.passed);
        assert_eq!(r.match_steps, vec![Some(2)]);
    }

    #[test]
    fn empty_trajectory_fails_first_guard() {
        let f = lf(vec![PredicateCall::new("validate_stop_action", [""])]);
        let r = evaluate(&f, &Trajectory::new("t", "g", Source::Sampled), &reg()).unwrap();
        assert!(!r.passed);
        assert_eq!(r.first_fail_index, Some(0));
    }

    #[test]
    fn click_predicate_reports_step() {
        let call = PredicateCall::new("validate_click_action", ["Pro Expense"]);
        assert_eq!(evaluate_predicate(&call, &stop_traj(""), &reg()).unwrap(), Some(1));
        let ty = PredicateCall::new("validate_type_action", ["Clock", "Search apps, web and more"]);
        assert_eq!(evaluate_predicate(&ty, &stop_traj(""), &reg()).unwrap(), None);
    }

    #[test]
    fn matching_is_nfc_and_trim_insensitive() {
        let call = PredicateCall::new("validate_click_action", [" Pro Expense  "]);
        assert_eq!(evaluate_predicate(&call, &stop_traj(""), &reg()).unwrap(), Some(1));
        let case = PredicateCall::new("validate_click_action", ["pro expense"]);
        assert_eq!(evaluate_predicate(&case, &stop_traj(""), &reg()).unwrap(), None);
    }

    #[test]
    fn unresolved_target_is_a_runtime_error() {
        let mut t = Trajectory::new("t", "g", Source::Sampled);
        t.push(UiState::default(), Action::stop("x"));
        t.steps.insert(0, crate::trajectory::Step { t: 1, state: UiState::default(), action: Action::click("9") });
        let f = lf(vec![
            PredicateCall::new("validate_stop_action", ["x"]),
            PredicateCall::new("validate_click_action", ["a"]),
        ]);
        let err = evaluate(&f, &t, &reg()).unwrap_err();
        assert_eq!(err.guard_index, 1);
    }

    #[test]
    fn canonicalize_trims_and_is_idempotent() {
        let f = lf(vec![PredicateCall::new("validate_click_action", ["Pro Expense "])]);
        let c = canonicalize(&f);
        assert_eq!(c.guards[0].args[0], "Pro Expense");
        assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn canonicalize_applies_nfc() {
        let decomposed = "Cafe\u{301}";
        let f = lf(vec![PredicateCall::new("validate_click_action", [decomposed])]);
        assert_eq!(canonicalize(&f).guards[0].args[0], "Caf\u{e9}");
    }

    #[test]
    fn prefix_of_passing_function_passes() {
        let f = lf(vec![
            PredicateCall::new("validate_click_action", ["Pro Expense"]),
            PredicateCall::new("validate_stop_action", ["a"]),
        ]);
        let t = stop_traj("a");
        assert!(evaluate(&f, &t, &reg()).unwrap().passed);
        let prefix = lf(f.guards[..1].to_vec());
        assert!(evaluate(&prefix, &t, &reg()).unwrap().passed);
    }
}
