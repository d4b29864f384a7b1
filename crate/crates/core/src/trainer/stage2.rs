//! Stage 2: abstractive summarization with optional curriculum weighting.

use std::time::Instant;

use rand::seq::SliceRandom;

use super::optim::{clip_grad_norm, AdamW, ParamGroup};
use super::report::{EvalPoint, TrainingReport};
use super::TrainConfig;
use crate::autodiff::{Tape, Tensor};
use crate::corpus::{frame, Example, FramedExample, Vocabulary};
use crate::curriculum::CurriculumState;
use crate::error::{Error, Result};
use crate::model::{DecodeMode, FramedDocument, Seq2SeqModel};
use crate::rng::{substream, Stream};
use crate::textmetrics::{evaluate_rouge, RougeSummary, TokenSeq};

/// Framed validation documents with their reference token sequences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalSet {
    pub ids: Vec<String>,
    pub docs: Vec<FramedDocument>,
    pub references: Vec<TokenSeq>,
}

impl EvalSet {
    /// Examples that cannot be framed are left out and logged.
    pub fn new(examples: &[Example], vocab: &Vocabulary, max_len: usize) -> Self {
        let mut set = Self::default();
        for ex in examples {
            match frame(ex, vocab, max_len) {
                Ok(f) => {
                    set.ids.push(f.id);
                    set.docs.push(f.doc);
                    set.references.push(ex.summary_tokens());
                }
                Err(e) => log::warn!("validation example skipped: {e}"),
            }
        }
        set
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

/// Decodes every document and scores it against its reference.
pub fn evaluate(
    model: &Seq2SeqModel,
    vocab: &Vocabulary,
    set: &EvalSet,
    mode: DecodeMode,
    max_decode_len: usize,
) -> Result<RougeSummary> {
    let candidates = set
        .docs
        .iter()
        .map(|doc| {
            let ids = model.generate(doc, mode, max_decode_len)?;
            Ok(TokenSeq(vocab.decode(&ids)))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_rouge(&candidates, &set.references)
}

/// Per-sample gradient weights before the `1/B` batch mean: `σ*(ℓᵢ)` under
/// a curriculum whose `τ` is set, and 1 otherwise.
pub fn sample_weights(curriculum: Option<&CurriculumState>, losses: &[f64]) -> Result<Vec<f64>> {
    match curriculum {
        Some(c) if c.tau().is_some() => losses.iter().map(|&l| c.sigma_star(l)).collect(),
        _ => Ok(vec![1.0; losses.len()]),
    }
}

/// With a tagging stage, its modules form a slower group and the rest of
/// the decoder a faster one. Without it everything shares `lr_main`. The
/// tagging head is never trained here.
pub fn stage2_groups(model: &Seq2SeqModel, config: &TrainConfig) -> Vec<ParamGroup> {
    let pretrained = model.pretrained_param_ids();
    let decoder = model.decoder_param_ids();
    if config.regime.uses_sentence_attention() {
        vec![
            ParamGroup {
                name: "pretrained".into(),
                ids: pretrained,
                lr: config.lr_pretrained,
            },
            ParamGroup {
                name: "main".into(),
                ids: decoder,
                lr: config.lr_main,
            },
        ]
    } else {
        let mut ids = pretrained;
        ids.extend(decoder);
        ids.sort();
        vec![ParamGroup {
            name: "main".into(),
            ids,
            lr: config.lr_main,
        }]
    }
}

fn snapshot(model: &Seq2SeqModel) -> Vec<Tensor> {
    model.params().iter().map(|(_, p)| p.value.clone()).collect()
}

fn restore(model: &mut Seq2SeqModel, values: Vec<Tensor>) {
    for (p, v) in model.params_mut().iter_mut().zip(values) {
        p.value = v;
    }
}

/// Trains on `train`, validating with greedy decoding every
/// `config.eval_every` steps and after the last step. The model is left
/// at the checkpoint with the best validation ROUGE-L (earliest on ties).
pub fn stage2_train(
    model: &mut Seq2SeqModel,
    train: &[FramedExample],
    val: &EvalSet,
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<TrainingReport> {
    config.validate()?;
    let regime = config.regime;
    if regime.uses_sentence_attention() {
        if !model.config().sentence_attention {
            return Err(Error::Argument(format!(
                "regime {regime} needs a model with sentence attention"
            )));
        }
        if !model.stage1_done() {
            return Err(Error::Argument(format!(
                "regime {regime} requires the tagging stage first"
            )));
        }
    }
    if train.is_empty() {
        return Err(Error::Argument("no training examples".into()));
    }
    let started = Instant::now();
    let batch = config.batch_size.min(train.len());
    let per_epoch = train.len() / batch;
    let mut total = config.epochs * per_epoch;
    if config.max_steps > 0 {
        total = total.min(config.max_steps);
    }

    let mut opt = AdamW::new(config.adam, stage2_groups(model, config), model.params())?;
    let mut curriculum = if regime.uses_curriculum() {
        Some(config.curriculum()?)
    } else {
        None
    };
    let mut rng = substream(config.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut report = TrainingReport {
        regime,
        seed: config.seed,
        train_loss: Vec::with_capacity(total),
        evals: Vec::new(),
        best_step: 0,
        best_rouge_l: f64::NEG_INFINITY,
        total_steps: total,
        wall_clock: Default::default(),
    };
    let mut best: Option<Vec<Tensor>> = None;

    for step in 0..total {
        if step % per_epoch == 0 {
            order.shuffle(&mut rng);
        }
        let start = (step % per_epoch) * batch;
        let picked = &order[start..start + batch];

        let mut tape = Tape::new();
        let mut nodes = Vec::with_capacity(batch);
        let mut losses = Vec::with_capacity(batch);
        for &i in picked {
            let ex = &train[i];
            let loss = model.summarization_loss(&mut tape, &ex.doc, &ex.target)?;
            nodes.push(loss);
            losses.push(tape.value(loss).item());
        }
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::Diverged {
                step,
                sample_ids: picked.iter().map(|&i| train[i].id.clone()).collect(),
                losses,
            });
        }
        // Confidences come from the detached losses, so they act as
        // constant per-sample weights in the backward pass.
        let weights = sample_weights(curriculum.as_ref(), &losses)?;
        let terms: Vec<_> = nodes
            .iter()
            .zip(&weights)
            .map(|(&n, &w)| (n, w / batch as f64))
            .collect();
        let objective = tape.combine(&terms)?;
        let grads = tape.backward(objective)?;
        let params = model.params_mut();
        params.zero_grad();
        grads.accumulate_into(params);
        clip_grad_norm(params, config.clip_norm);
        opt.step(params);
        if let Some(c) = &mut curriculum {
            c.update_tau(&losses)?;
        }
        report
            .train_loss
            .push((step, losses.iter().sum::<f64>() / batch as f64));

        let done = step + 1;
        if !val.is_empty() && (done % config.eval_every == 0 || done == total) {
            let scores = evaluate(model, vocab, val, DecodeMode::Greedy, config.max_decode_len)?;
            log::debug!(
                "{regime} seed {} step {done}: loss {:.4} val RG-L {:.4}",
                config.seed,
                report.train_loss.last().map_or(f64::NAN, |l| l.1),
                scores.rouge_l
            );
            report.evals.push(EvalPoint {
                step: done,
                rouge1: scores.rouge1,
                rouge2: scores.rouge2,
                rouge_l: scores.rouge_l,
            });
            if scores.rouge_l > report.best_rouge_l {
                report.best_rouge_l = scores.rouge_l;
                report.best_step = done;
                best = Some(snapshot(model));
            }
        }
    }
    model.params_mut().zero_grad();
    match best {
        Some(values) => restore(model, values),
        None => {
            report.best_step = total;
            report.best_rouge_l = f64::NAN;
        }
    }
    report.wall_clock = started.elapsed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::TauPolicy;

    #[test]
    fn weights_are_one_before_tau_exists() {
        let c = CurriculumState::new(1.0, TauPolicy::BatchMean).unwrap();
        assert_eq!(sample_weights(Some(&c), &[0.5, 3.0]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(sample_weights(None, &[0.5]).unwrap(), vec![1.0]);
    }

    #[test]
    fn weights_fall_with_loss() {
        let c = CurriculumState::new(1.0, TauPolicy::Static(1.0)).unwrap();
        let w = sample_weights(Some(&c), &[0.0, 0.5, 1.0, 2.0, 9.0]).unwrap();
        assert!(w.windows(2).all(|p| p[0] >= p[1]));
        assert_eq!(w[2], 1.0);
        assert!(w.iter().all(|&x| x > 0.0 && x <= std::f64::consts::E));
    }
}
