//! Two-stage fine-tuning and the four training regimes.
//!
//! | regime        | sentence attention + tagging stage | curriculum |
//! |---------------|------------------------------------|------------|
//! | `baseline`    | no                                 | no         |
//! | `sentsum`     | yes                                | no         |
//! | `currsum`     | no                                 | yes        |
//! | `currsentsum` | yes                                | yes        |

mod compare;
pub mod optim;
mod pipeline;
mod report;
mod stage1;
mod stage2;

use std::fmt;
use std::str::FromStr;

pub use compare::{median_steps, run_comparison, ComparisonRow, ComparisonTable};
pub use optim::{clip_grad_norm, AdamW, AdamWConfig, ParamGroup};
pub use pipeline::{prepare, run_pipeline, PreparedData, RunOutcome};
pub use report::{EvalPoint, TrainingReport};
pub use stage1::{stage1_finetune, tagging_mse};
pub use stage2::{evaluate, sample_weights, stage2_groups, stage2_train, EvalSet};

use crate::curriculum::{CurriculumState, TauPolicy};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Baseline,
    SentSum,
    CurrSum,
    CurrSentSum,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::Baseline,
        Regime::SentSum,
        Regime::CurrSum,
        Regime::CurrSentSum,
    ];

    /// Sentence attention and the tagging stage come together.
    pub fn uses_sentence_attention(self) -> bool {
        matches!(self, Regime::SentSum | Regime::CurrSentSum)
    }

    pub fn uses_curriculum(self) -> bool {
        matches!(self, Regime::CurrSum | Regime::CurrSentSum)
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Regime::Baseline),
            "sentsum" => Ok(Regime::SentSum),
            "currsum" => Ok(Regime::CurrSum),
            "currsentsum" => Ok(Regime::CurrSentSum),
            other => Err(Error::Argument(format!(
                "unknown regime {other:?} (expected baseline, sentsum, currsum or currsentsum)"
            ))),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Baseline => "baseline",
            Regime::SentSum => "sentsum",
            Regime::CurrSum => "currsum",
            Regime::CurrSentSum => "currsentsum",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub regime: Regime,
    /// Decoder and, without a tagging stage, everything else.
    pub lr_main: f64,
    /// Parts trained by the tagging stage.
    pub lr_pretrained: f64,
    pub adam: AdamWConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Hard cap on optimizer steps; 0 means no cap.
    pub max_steps: usize,
    pub seed: u64,
    pub lambda: f64,
    pub tau: TauPolicy,
    /// Validation interval in optimizer steps.
    pub eval_every: usize,
    pub clip_norm: f64,
    pub stage1_steps: usize,
    pub stage1_lr: f64,
    /// Longest summary produced during validation decoding.
    pub max_decode_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regime: Regime::Baseline,
            lr_main: 3e-5,
            lr_pretrained: 1e-5,
            adam: AdamWConfig::default(),
            epochs: 1,
            batch_size: 8,
            max_steps: 0,
            seed: 0,
            lambda: 1.0,
            tau: TauPolicy::default(),
            eval_every: 50,
            clip_norm: 1.0,
            stage1_steps: 500,
            stage1_lr: 1e-3,
            max_decode_len: 32,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, reported together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let positive = |name: &str, v: f64, problems: &mut Vec<String>| {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        };
        positive("lr_main", self.lr_main, &mut problems);
        positive("lr_pretrained", self.lr_pretrained, &mut problems);
        positive("stage1_lr", self.stage1_lr, &mut problems);
        positive("lambda", self.lambda, &mut problems);
        positive("clip_norm", self.clip_norm, &mut problems);
        if self.lr_pretrained > self.lr_main {
            problems.push(format!(
                "lr_pretrained ({}) must not exceed lr_main ({})",
                self.lr_pretrained, self.lr_main
            ));
        }
        for (name, b) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&b) {
                problems.push(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam.eps > 0.0) {
            problems.push(format!("eps must be positive, got {}", self.adam.eps));
        }
        if !(self.adam.weight_decay >= 0.0 && self.adam.weight_decay.is_finite()) {
            problems.push(format!(
                "weight_decay must be non-negative, got {}",
                self.adam.weight_decay
            ));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("eval_every", self.eval_every),
            ("max_decode_len", self.max_decode_len),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if let (true, Err(Error::Argument(m))) = (self.lambda > 0.0, self.curriculum()) {
            problems.push(m);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn curriculum(&self) -> Result<CurriculumState> {
        CurriculumState::new(self.lambda, self.tau)
    }
}
