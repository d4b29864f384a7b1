//! Training reports and their CSV form.

use std::fmt::Write as _;
use std::time::Duration;

use super::Regime;

/// Validation scores after `step` optimizer steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint {
    pub step: usize,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingReport {
    pub regime: Regime,
    pub seed: u64,
    /// `(step, mean task loss)`, where `step` counts updates applied before
    /// the batch was scored. The first entry is the loss of the initial
    /// model.
    pub train_loss: Vec<(usize, f64)>,
    pub evals: Vec<EvalPoint>,
    /// Step of the selected checkpoint (best validation ROUGE-L).
    pub best_step: usize,
    pub best_rouge_l: f64,
    pub total_steps: usize,
    pub wall_clock: Duration,
}

impl TrainingReport {
    /// First evaluated step whose validation ROUGE-L reaches `threshold`.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.evals
            .iter()
            .find(|e| e.rouge_l >= threshold)
            .map(|e| e.step)
    }

    pub fn best_eval(&self) -> Option<&EvalPoint> {
        self.evals.iter().find(|e| e.step == self.best_step)
    }

    /// Long-format CSV with header `step,split,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,split,metric,value\n");
        self.write_rows(&mut out, "");
        out
    }

    /// Rows without a header, each prefixed by `prefix`.
    pub(crate) fn write_rows(&self, out: &mut String, prefix: &str) {
        for (step, loss) in &self.train_loss {
            writeln!(out, "{prefix}{step},train,loss,{loss:e}").unwrap();
        }
        for e in &self.evals {
            for (metric, v) in [("rouge1", e.rouge1), ("rouge2", e.rouge2), ("rougeL", e.rouge_l)] {
                writeln!(out, "{prefix}{},val,{metric},{v:e}", e.step).unwrap();
            }
        }
    }
}
