//! The evaluation metrics on hand-made inputs.
//!
//!     cargo run --example metrics_report

use std::collections::BTreeSet;

use core_selftrain::abstraction::SynthesisAttemptLog;
use core_selftrain::pipeline::{compute_ngpt, intent_preference_ratio, keystep_metrics, synthesis_metrics, Judgment};

fn main() -> anyhow::Result<()> {
    for (perf, traj) in [(7.75, 45), (1.11, 38), (-0.77, 63)] {
        println!("NGPT({perf:+}, {traj}) = {:.4}", compute_ngpt(perf, traj)?);
    }

    let predicted: BTreeSet<u32> = [1, 2, 4].into();
    let truth: BTreeSet<u32> = [2, 4, 5].into();
    let m = keystep_metrics(&predicted, &truth, 6);
    println!("key steps: acc {:.3} prec {:.3} rec {:.3} f1 {:.3}", m.accuracy, m.precision, m.recall, m.f1);

    let mut logs: Vec<_> = (0..9).map(|i| SynthesisAttemptLog::with_success_at(format!("step {i}"), Some(1))).collect();
    logs.push(SynthesisAttemptLog::with_success_at("hard step", Some(3)));
    let s = synthesis_metrics(&logs)?;
    println!("synthesis: OSR {:.3} FTSR {:.3} ESP {:?}", s.osr, s.ftsr, s.esp);

    let judgments = [Judgment::Intent2, Judgment::Intent2, Judgment::Intent1, Judgment::Undecided];
    println!("refined intent preferred in {:.0}% of judgments", 100.0 * intent_preference_ratio(&judgments)?);
    Ok(())
}
