use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::abstraction::SynthesisAttemptLog;

/// Normalized gain per trajectory: `perf_delta / traj_delta`.
pub fn compute_ngpt(perf_delta: f64, traj_delta: i64) -> Result<f64, PipelineError> {
    if traj_delta <= 0 {
        return Err(PipelineError::ZeroTrajDelta);
    }
    Ok(perf_delta / traj_delta as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_sets<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>, universe_size: usize) -> Self {
        let tp = predicted.intersection(truth).count() as u64;
        let fp = predicted.len() as u64 - tp;
        let fn_ = truth.len() as u64 - tp;
        let tn = (universe_size as u64).saturating_sub(tp + fp + fn_);
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn add(&mut self, o: ConfusionCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn metrics(&self) -> KeyStepMetrics {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        KeyStepMetrics { accuracy: ratio(self.tp + self.tn, self.total()), precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyStepMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-step binary classification scores; zero denominators give 0.
pub fn keystep_metrics<T: Ord>(predicted: &BTreeSet<T>, truth: &BTreeSet<T>, universe_size: usize) -> KeyStepMetrics {
    ConfusionCounts::from_sets(predicted, truth, universe_size).metrics()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisMetrics {
    /// Fraction of instances with any successful attempt.
    pub osr: f64,
    /// Fraction succeeding on the first attempt.
    pub ftsr: f64,
    /// Mean success position over successful instances; absent when none succeeded.
    pub esp: Option<f64>,
}

pub fn synthesis_metrics(logs: &[SynthesisAttemptLog]) -> Result<SynthesisMetrics, PipelineError> {
    if logs.is_empty() {
        return Err(PipelineError::EmptyLogs);
    }
    let n = logs.len() as f64;
    let positions: Vec<u32> = logs.iter().filter_map(|l| l.success_position).collect();
    let firsts = positions.iter().filter(|&&p| p == 1).count() as f64;
    let esp = if positions.is_empty() {
        None
    } else {
        Some(positions.iter().map(|&p| p as f64).sum::<f64>() / positions.len() as f64)
    };
    Ok(SynthesisMetrics { osr: positions.len() as f64 / n, ftsr: firsts / n, esp })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgment {
    Intent1,
    Intent2,
    Undecided,
}

impl std::str::FromStr for Judgment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "intent1" | "1" => Ok(Judgment::Intent1),
            "intent2" | "2" => Ok(Judgment::Intent2),
            "undecided" | "tie" => Ok(Judgment::Undecided),
            other => Err(format!("unknown judgment '{other}'")),
        }
    }
}

/// Share of judgments preferring the refined (second) intent.
pub fn intent_preference_ratio(judgments: &[Judgment]) -> Result<f64, PipelineError> {
    if judgments.is_empty() {
        return Err(PipelineError::EmptyJudgments);
    }
    Ok(judgments.iter().filter(|j| **j == Judgment::Intent2).count() as f64 / judgments.len() as f64)
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iteration: u32,
    pub overall_score: f64,
    pub generalization_score: f64,
    pub avg_path_count: f64,
    /// Cumulative sampled trajectories.
    pub traj_count: u64,
    pub ngpt: Option<f64>,
    pub keystep: Option<KeyStepMetrics>,
    pub synthesis: Option<SynthesisMetrics>,
    pub intent_preference_ratio: Option<f64>,
    pub pool_size: usize,
    pub training_size: usize,
}

pub const CSV_HEADER: &str = "iteration,overall_score,generalization_score,avg_path_count,traj_count,ngpt,\
keystep_accuracy,keystep_precision,keystep_recall,keystep_f1,synthesis_osr,synthesis_ftsr,synthesis_esp,\
intent_preference_ratio,pool_size,training_size";

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let k = self.keystep;
        let y = self.synthesis;
        write!(
            s,
            "{},{:.6},{:.6},{:.6},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.overall_score,
            self.generalization_score,
            self.avg_path_count,
            self.traj_count,
            cell(self.ngpt),
            cell(k.map(|k| k.accuracy)),
            cell(k.map(|k| k.precision)),
            cell(k.map(|k| k.recall)),
            cell(k.map(|k| k.f1)),
            cell(y.map(|y| y.osr)),
            cell(y.map(|y| y.ftsr)),
            cell(y.and_then(|y| y.esp)),
            cell(self.intent_preference_ratio),
            self.pool_size,
            self.training_size,
        )
        .expect("writing to a String");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-4
    }

    #[test]
    fn ngpt_basics() {
        assert_eq!(compute_ngpt(0.0, 17).unwrap(), 0.0);
        assert!(matches!(compute_ngpt(1.0, 0), Err(PipelineError::ZeroTrajDelta)));
    }

    #[test]
    fn keystep_hand_counts() {
        let c = ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 6 }.metrics();
        assert!(close(c.precision, 0.6667) && close(c.recall, 0.6667) && close(c.accuracy, 0.8) && close(c.f1, 0.6667));
        let truth: BTreeSet<u32> = [1, 2].into();
        let m = keystep_metrics(&truth, &truth, 5);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        let m = keystep_metrics(&BTreeSet::new(), &truth, 5);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn synthesis_rates() {
        let mut logs: Vec<_> = (0..98).map(|i| SynthesisAttemptLog::with_success_at(format!("d{i}"), Some(1))).collect();
        logs.push(SynthesisAttemptLog::with_success_at("late", Some(2)));
        let m = synthesis_metrics(&logs).unwrap();
        assert!(close(m.ftsr, 0.9899) && close(m.esp.unwrap(), 1.0101) && m.osr == 1.0);
        let none = synthesis_metrics(&[SynthesisAttemptLog::with_success_at("x", None)]).unwrap();
        assert_eq!((none.osr, none.ftsr, none.esp), (0.0, 0.0, None));
        assert!(synthesis_metrics(&[]).is_err());
    }

    #[test]
    fn preference_ratio() {
        let mut j = vec![Judgment::Intent2; 79];
        j.extend(vec![Judgment::Intent1; 21]);
        assert!(close(intent_preference_ratio(&j).unwrap(), 0.79));
        assert_eq!(intent_preference_ratio(&[Judgment::Undecided; 3]).unwrap(), 0.0);
        assert!(intent_preference_ratio(&[]).is_err());
    }

    #[test]
    fn csv_row_has_header_arity() {
        let r = MetricsReport {
            iteration: 1,
            overall_score: 0.5,
            generalization_score: 0.25,
            avg_path_count: 1.5,
            traj_count: 70,
            ngpt: None,
            keystep: None,
            synthesis: None,
            intent_preference_ratio: None,
            pool_size: 14,
            training_size: 30,
        };
        assert_eq!(r.csv_row().split(',').count(), CSV_HEADER.split(',').count());
        assert!(r.csv_row().starts_with("1,0.500000,0.250000,1.500000,70,,"));
    }
}
