//! Demonstration → label functions: describe each step, pick the key steps,
//! and synthesize one validated label function per key step.

mod codegen;
mod mock;

pub use codegen::{candidate_to_label_function, code_to_dsl};
pub use mock::{mock_key_step_heuristic, mock_synthesizer, MockKeySteps, MockSynth};

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{evaluate, ApiRegistry, LabelFunction, Origin};
use crate::llm::{ChatModel, ChatRequest};
use crate::trajectory::{describe_trajectory, SemanticDescription, Source, TemplateTable, Trajectory, TrajectoryError};

const KEY_STEP_PROMPT: &str = include_str!("../../data/prompts/key_step_identification.txt");
const SYNTHESIS_PROMPT: &str = include_str!("../../data/prompts/label_function_synthesis.txt");

#[derive(Debug, Error)]
pub enum AbstractionError {
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("no key steps selected")]
    EmptySelection,
    #[error("no usable label function for '{}' after {} attempts", .0.desc_text, .0.attempts.len())]
    SynthesisExhausted(Box<SynthesisAttemptLog>),
    #[error("description does not match any template: {0}")]
    UnrecognizedTemplate(String),
    #[error("no label function could be produced ({} key steps tried)", .0.len())]
    AllStepsFailed(Vec<SynthesisAttemptLog>),
    #[error("nothing to abstract: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyStepSelection {
    pub selected: Vec<SemanticDescription>,
    pub oracle_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt_no: u32,
    pub produced_text: String,
    pub parse_ok: bool,
    pub source_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthesisAttemptLog {
    pub desc_text: String,
    pub attempts: Vec<AttemptRecord>,
    pub success_position: Option<u32>,
}

impl SynthesisAttemptLog {
    /// A log whose only content is where (if anywhere) synthesis succeeded.
    pub fn with_success_at(desc_text: impl Into<String>, position: Option<u32>) -> Self {
        let n = position.unwrap_or(1);
        let attempts = (1..=n)
            .map(|i| AttemptRecord {
                attempt_no: i,
                produced_text: String::new(),
                parse_ok: Some(i) == position,
                source_valid: Some(i) == position,
            })
            .collect();
        SynthesisAttemptLog { desc_text: desc_text.into(), attempts, success_position: position }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Llm,
    #[default]
    Mock,
}

impl std::str::FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" => Ok(OracleKind::Llm),
            "mock" => Ok(OracleKind::Mock),
            other => Err(format!("unknown oracle '{other}' (expected llm or mock)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractorConfig {
    pub max_attempts: u32,
    pub keystep_oracle: OracleKind,
    pub synth_oracle: OracleKind,
    /// Benchmark-specific hints spliced into the synthesis prompt.
    pub guidance: String,
    pub model: String,
}

impl Default for AbstractorConfig {
    fn default() -> Self {
        AbstractorConfig {
            max_attempts: 5,
            keystep_oracle: OracleKind::Mock,
            synth_oracle: OracleKind::Mock,
            guidance: String::new(),
            model: "default".into(),
        }
    }
}

pub trait KeyStepOracle: Send + Sync {
    fn name(&self) -> &str;
    fn select(&self, descs: &[SemanticDescription], goal: &str) -> Result<KeyStepSelection, AbstractionError>;
}

pub trait SynthOracle: Send + Sync {
    fn name(&self) -> &str;
    /// Candidate text (DSL or guard-sequence code) for attempt `attempt` (1-based).
    fn propose(&self, desc: &SemanticDescription, attempt: u32) -> Result<String, AbstractionError>;
}

fn numbered(descs: &[SemanticDescription]) -> String {
    descs.iter().enumerate().map(|(i, d)| format!("{}. {}", i + 1, d.text)).collect::<Vec<_>>().join("\n")
}

/// Items of a numbered-list reply, in order.
pub fn parse_numbered_list(reply: &str) -> Vec<String> {
    reply
        .lines()
        .filter_map(|l| {
            let l = l.trim();
            let digits = l.chars().take_while(char::is_ascii_digit).count();
            if digits == 0 {
                return None;
            }
            let rest = &l[digits..];
            let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
            Some(rest.trim().to_string())
        })
        .collect()
}

/// Model-backed key-step selection.
pub struct LlmKeySteps {
    pub chat: Arc<dyn ChatModel>,
    pub model: String,
}

impl KeyStepOracle for LlmKeySteps {
    fn name(&self) -> &str {
        "llm"
    }

    fn select(&self, descs: &[SemanticDescription], goal: &str) -> Result<KeyStepSelection, AbstractionError> {
        let prompt = KEY_STEP_PROMPT.replace("<<OBJECTIVE>>", goal).replace("<<ACTIONS>>", &numbered(descs));
        let reply = self
            .chat
            .chat(&ChatRequest::user(&self.model, prompt))
            .map_err(|e| AbstractionError::OracleUnavailable(e.to_string()))?;
        let mut selected = Vec::new();
        let mut cursor = 0;
        for item in parse_numbered_list(&reply.text) {
            match descs[cursor..].iter().position(|d| d.text == item) {
                Some(off) => {
                    selected.push(descs[cursor + off].clone());
                    cursor += off + 1;
                }
                None => log::info!("dropping key-step reply line that matches no remaining input: {item:?}"),
            }
        }
        Ok(KeyStepSelection { selected, oracle_name: "llm".into(), raw_response: Some(reply.text) })
    }
}

/// Model-backed synthesis using the verification-function prompt.
pub struct LlmSynth {
    pub chat: Arc<dyn ChatModel>,
    pub model: String,
    pub api_listing: String,
    pub guidance: String,
}

impl LlmSynth {
    pub fn prompt(&self, desc: &SemanticDescription) -> String {
        SYNTHESIS_PROMPT
            .replace("<<API_FUNCTIONS>>", &self.api_listing)
            .replace("<<GUIDANCE>>", &self.guidance)
            .replace("<<TASK>>", &desc.text)
    }
}

impl SynthOracle for LlmSynth {
    fn name(&self) -> &str {
        "llm"
    }

    fn propose(&self, desc: &SemanticDescription, _attempt: u32) -> Result<String, AbstractionError> {
        self.chat
            .chat(&ChatRequest::user(&self.model, self.prompt(desc)))
            .map(|r| r.text)
            .map_err(|e| AbstractionError::OracleUnavailable(e.to_string()))
    }
}

/// The pair of oracles an abstraction run uses.
pub struct Oracles {
    pub key_steps: Box<dyn KeyStepOracle>,
    pub synth: Box<dyn SynthOracle>,
}

impl Oracles {
    pub fn mock() -> Self {
        Oracles { key_steps: Box::new(MockKeySteps::default()), synth: Box::new(MockSynth::default()) }
    }

    /// Oracles as selected by `cfg`; `chat` is required when either is `llm`.
    pub fn from_config(
        cfg: &AbstractorConfig,
        registry: &ApiRegistry,
        chat: Option<Arc<dyn ChatModel>>,
    ) -> Result<Self, AbstractionError> {
        let need = || chat.clone().ok_or_else(|| AbstractionError::OracleUnavailable("no llm client configured".into()));
        let key_steps: Box<dyn KeyStepOracle> = match cfg.keystep_oracle {
            OracleKind::Mock => Box::new(MockKeySteps::default()),
            OracleKind::Llm => Box::new(LlmKeySteps { chat: need()?, model: cfg.model.clone() }),
        };
        let synth: Box<dyn SynthOracle> = match cfg.synth_oracle {
            OracleKind::Mock => Box::new(MockSynth::default()),
            OracleKind::Llm => Box::new(LlmSynth {
                chat: need()?,
                model: cfg.model.clone(),
                api_listing: registry.prompt_listing(),
                guidance: cfg.guidance.clone(),
            }),
        };
        Ok(Oracles { key_steps, synth })
    }
}

/// Asks `oracle` for the key steps; the result is always a subsequence of `descs`.
pub fn identify_key_steps(
    descs: &[SemanticDescription],
    goal: &str,
    oracle: &dyn KeyStepOracle,
) -> Result<KeyStepSelection, AbstractionError> {
    if descs.is_empty() {
        return Err(AbstractionError::EmptyInput("no step descriptions"));
    }
    let mut sel = oracle.select(descs, goal)?;
    // Defensive: keep only an order-preserving subsequence of the input.
    let mut cursor = 0;
    sel.selected.retain(|d| match descs[cursor..].iter().position(|x| x == d) {
        Some(off) => {
            cursor += off + 1;
            true
        }
        None => false,
    });
    if sel.selected.is_empty() {
        return Err(AbstractionError::EmptySelection);
    }
    Ok(sel)
}

/// Up to `max_attempts` proposals; the first that parses and passes on
/// `source` is accepted.
pub fn synthesize_label_fn(
    desc: &SemanticDescription,
    source: &Trajectory,
    registry: &ApiRegistry,
    oracle: &dyn SynthOracle,
    max_attempts: u32,
) -> Result<(LabelFunction, SynthesisAttemptLog), AbstractionError> {
    let mut log = SynthesisAttemptLog { desc_text: desc.text.clone(), attempts: Vec::new(), success_position: None };
    for attempt in 1..=max_attempts.max(1) {
        let produced = match oracle.propose(desc, attempt) {
            Ok(text) => text,
            Err(e) => {
                log::debug!("synthesis attempt {attempt} for {:?}: {e}", desc.text);
                log.attempts.push(AttemptRecord { attempt_no: attempt, produced_text: String::new(), parse_ok: false, source_valid: false });
                continue;
            }
        };
        let parsed = candidate_to_label_function(&produced, registry);
        let (parse_ok, source_valid, lf) = match parsed {
            Ok(lf) => {
                let valid = matches!(evaluate(&lf, source, registry), Ok(r) if r.passed);
                (true, valid, Some(lf))
            }
            Err(_) => (false, false, None),
        };
        log.attempts.push(AttemptRecord { attempt_no: attempt, produced_text: produced, parse_ok, source_valid });
        if let (true, Some(mut lf)) = (source_valid, lf) {
            log.success_position = Some(attempt);
            lf.source_desc = Some(desc.text.clone());
            return Ok((lf, log));
        }
    }
    Err(AbstractionError::SynthesisExhausted(Box::new(log)))
}

/// Result of abstracting one trajectory.
#[derive(Debug, Clone)]
pub struct Abstraction {
    pub label_functions: Vec<LabelFunction>,
    pub selection: KeyStepSelection,
    pub logs: Vec<SynthesisAttemptLog>,
}

/// describe → key steps → one label function per key step, in key-step order.
/// Steps whose synthesis is exhausted are skipped (their logs are kept).
pub fn abstract_trajectory(
    traj: &Trajectory,
    goal: &str,
    registry: &ApiRegistry,
    table: &TemplateTable,
    oracles: &Oracles,
    cfg: &AbstractorConfig,
) -> Result<Abstraction, AbstractionError> {
    let descs = describe_trajectory(traj, table)?;
    if descs.is_empty() {
        return Err(AbstractionError::AllStepsFailed(Vec::new()));
    }
    let selection = match identify_key_steps(&descs, goal, oracles.key_steps.as_ref()) {
        Ok(s) => s,
        Err(AbstractionError::EmptySelection) => return Err(AbstractionError::AllStepsFailed(Vec::new())),
        Err(e) => return Err(e),
    };
    let origin = match traj.source {
        Source::Expert | Source::PseudoExpert => Origin::Expert,
        Source::Sampled => Origin::Expansion,
    };
    let outcomes: Vec<_> = selection
        .selected
        .par_iter()
        .map(|d| synthesize_label_fn(d, traj, registry, oracles.synth.as_ref(), cfg.max_attempts))
        .collect();
    let mut label_functions = Vec::new();
    let mut logs = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok((mut lf, log)) => {
                lf.origin = origin;
                label_functions.push(lf);
                logs.push(log);
            }
            Err(AbstractionError::SynthesisExhausted(log)) => {
                log::warn!("skipping key step {:?}: synthesis exhausted", log.desc_text);
                logs.push(*log);
            }
            Err(e) => return Err(e),
        }
    }
    if label_functions.is_empty() {
        return Err(AbstractionError::AllStepsFailed(logs));
    }
    Ok(Abstraction { label_functions, selection, logs })
}

/// Attempt logs as JSON lines.
pub fn write_attempt_logs<W: Write>(w: &mut W, logs: &[SynthesisAttemptLog]) -> std::io::Result<()> {
    for l in logs {
        serde_json::to_writer(&mut *w, l)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_attempt_logs(text: &str) -> Result<Vec<SynthesisAttemptLog>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::PredicateCall;
    use crate::graph::{categorize, init_linear, Category};
    use crate::llm::CannedChat;
    use crate::trajectory::{Action, Element, UiState};

    fn expense_demo() -> Trajectory {
        let mut t = Trajectory::new("expense-1", "Delete the following expenses from pro expense: Rental Income", Source::Expert);
        let home = UiState {
            elements: vec![Element::new("1", "DIV", "Pro Expense"), Element::new("2", "A", "Settings")],
            ..Default::default()
        };
        t.push(home, Action::click("1"));
        let list = UiState {
            elements: vec![Element::new("5", "DIV", "Rental Income"), Element::new("6", "BUTTON", "Delete")],
            ..Default::default()
        };
        t.push(list.clone(), Action::click("5"));
        t.push(list.clone(), Action::click("6"));
        t.push(list, Action::stop(""));
        t
    }

    struct Scripted(Vec<&'static str>);

    impl SynthOracle for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn propose(&self, _d: &SemanticDescription, attempt: u32) -> Result<String, AbstractionError> {
            Ok(self.0.get(attempt as usize - 1).copied().unwrap_or("garbage").to_string())
        }
    }

    #[test]
    fn mock_pipeline_yields_self_consistent_graph() {
        let reg = ApiRegistry::builtin();
        let t = expense_demo();
        let a = abstract_trajectory(&t, &t.goal, &reg, &TemplateTable::default(), &Oracles::mock(), &AbstractorConfig::default())
            .unwrap();
        let guards: Vec<_> = a.label_functions.iter().map(|lf| lf.guards[0].clone()).collect();
        assert_eq!(
            guards,
            vec![
                PredicateCall::new("validate_click_action", ["Pro Expense"]),
                PredicateCall::new("validate_click_action", ["Rental Income"]),
                PredicateCall::new("validate_click_or_hover_action", ["click", "BUTTON", "Delete"]),
                PredicateCall::new("validate_stop_action", [""]),
            ]
        );
        assert!(a.logs.iter().all(|l| l.success_position == Some(1)));
        let g = init_linear(&a.label_functions, &t.task_id, 0).unwrap();
        assert_eq!(categorize(&g, &t, &reg).unwrap(), Category::FullyPassed);
    }

    #[test]
    fn retries_until_source_valid() {
        let reg = ApiRegistry::builtin();
        let t = expense_demo();
        let desc = SemanticDescription { step_t: 1, text: "Click on a UI element 'Pro Expense'".into() };
        let oracle = Scripted(vec![
            "not code at all",
            "fn verify(trajectory):\n  require validate_click_action(\"Nope\")\n",
            "fn verify(trajectory):\n  require validate_click_action(\"Pro Expense\")\n",
        ]);
        let (lf, log) = synthesize_label_fn(&desc, &t, &reg, &oracle, 5).unwrap();
        assert_eq!(lf.source_desc.as_deref(), Some(desc.text.as_str()));
        assert_eq!(log.success_position, Some(3));
        let flags: Vec<_> = log.attempts.iter().map(|a| (a.parse_ok, a.source_valid)).collect();
        assert_eq!(flags, vec![(false, false), (true, false), (true, true)]);
    }

    #[test]
    fn exhaustion_keeps_the_log() {
        let reg = ApiRegistry::builtin();
        let desc = SemanticDescription { step_t: 1, text: "x".into() };
        match synthesize_label_fn(&desc, &expense_demo(), &reg, &Scripted(vec![]), 5) {
            Err(AbstractionError::SynthesisExhausted(log)) => {
                assert_eq!(log.attempts.len(), 5);
                assert_eq!(log.success_position, None);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_key_steps_is_all_steps_failed() {
        let reg = ApiRegistry::builtin();
        let mut t = Trajectory::new("t", "Run the stopwatch", Source::Expert);
        t.push(UiState { elements: vec![Element::new("1", "A", "Home")], ..Default::default() }, Action::click("1"));
        let e = abstract_trajectory(&t, &t.goal, &reg, &TemplateTable::default(), &Oracles::mock(), &AbstractorConfig::default());
        assert!(matches!(e, Err(AbstractionError::AllStepsFailed(_))));
    }

    #[test]
    fn llm_key_steps_parse_by_exact_match() {
        let descs: Vec<_> = ["Click the link 'Home'", "Open the app 'Clock'", "Stop the task with answer: ''"]
            .iter()
            .enumerate()
            .map(|(i, s)| SemanticDescription { step_t: i as u32 + 1, text: s.to_string() })
            .collect();
        let echo = LlmKeySteps {
            chat: Arc::new(CannedChat(|_: &str| "1. Click the link 'Home'\n2. Open the app 'Clock'\n3. Stop the task with answer: ''".to_string())),
            model: "m".into(),
        };
        assert_eq!(identify_key_steps(&descs, "g", &echo).unwrap().selected, descs);
        let partial = LlmKeySteps {
            chat: Arc::new(CannedChat(|p: &str| {
                assert!(p.contains("Objective: Run the stopwatch"));
                "Here you go:\n1) Open the app 'Clock'\n2. Something invented".to_string()
            })),
            model: "m".into(),
        };
        let sel = identify_key_steps(&descs, "Run the stopwatch", &partial).unwrap();
        assert_eq!(sel.selected, vec![descs[1].clone()]);
    }

    #[test]
    fn llm_synthesis_prompt_is_filled() {
        let reg = ApiRegistry::builtin();
        let s = LlmSynth { chat: Arc::new(CannedChat(|_: &str| String::new())), model: "m".into(), api_listing: reg.prompt_listing(), guidance: String::new() };
        let p = s.prompt(&SemanticDescription { step_t: 1, text: "Open the app 'Clock'".into() });
        assert!(p.contains("validate_open_app"));
        assert!(p.trim_end().ends_with("Task: Open the app 'Clock'"));
        assert!(!p.contains("<<"));
    }
}
