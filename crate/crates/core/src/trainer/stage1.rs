//! Stage 1: sentence saliency tagging.
//!
//! Trains the encoder, the sentence-attention sublayers and the tagging
//! head to regress saliency labels. Decoder parameters are not in any
//! optimizer group, so they come out of this stage bit for bit unchanged.

use rand::seq::SliceRandom;

use super::optim::{clip_grad_norm, AdamW, ParamGroup};
use super::{Regime, TrainConfig};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::model::{FramedDocument, Seq2SeqModel};
use crate::rng::{substream, Stream};
use crate::textmetrics::SaliencyLabels;

fn aligned(doc: &FramedDocument, labels: &SaliencyLabels) -> Vec<f64> {
    if labels.len() == doc.sentence_count() {
        labels.scores.clone()
    } else {
        labels.truncated(doc.sentence_count()).scores
    }
}

/// Mean per-document tagging MSE.
pub fn tagging_mse(
    model: &Seq2SeqModel,
    docs: &[FramedDocument],
    labels: &[SaliencyLabels],
) -> Result<f64> {
    if docs.is_empty() || docs.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} documents with {} label sets",
            docs.len(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (doc, l) in docs.iter().zip(labels) {
        let mut tape = Tape::new();
        let loss = model.tagging_loss(&mut tape, doc, &aligned(doc, l))?;
        total += tape.value(loss).item();
    }
    Ok(total / docs.len() as f64)
}

/// Runs `config.stage1_steps` tagging steps and marks the model. Returns
/// the mean batch MSE of every step. Regimes without sentence attention
/// skip the stage.
pub fn stage1_finetune(
    model: &mut Seq2SeqModel,
    docs: &[FramedDocument],
    labels: &[SaliencyLabels],
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    if !config.regime.uses_sentence_attention() {
        log::warn!("regime {} has no tagging stage; skipping", config.regime);
        return Ok(Vec::new());
    }
    if !model.config().sentence_attention {
        return Err(Error::Argument(format!(
            "regime {} needs a model with sentence attention",
            config.regime
        )));
    }
    if docs.is_empty() || docs.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} documents with {} label sets",
            docs.len(),
            labels.len()
        )));
    }
    config.validate()?;
    debug_assert!(matches!(config.regime, Regime::SentSum | Regime::CurrSentSum));

    let targets: Vec<Vec<f64>> = docs.iter().zip(labels).map(|(d, l)| aligned(d, l)).collect();
    let mut ids = model.pretrained_param_ids();
    ids.extend(model.tag_head_param_ids());
    let groups = vec![ParamGroup {
        name: "tagging".into(),
        ids,
        lr: config.stage1_lr,
    }];
    let mut opt = AdamW::new(config.adam, groups, model.params())?;
    let mut rng = substream(config.seed, Stream::Shuffle);
    let batch = config.batch_size.min(docs.len());
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut cursor = order.len();
    let mut history = Vec::with_capacity(config.stage1_steps);

    for step in 0..config.stage1_steps {
        let mut picked = Vec::with_capacity(batch);
        while picked.len() < batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            picked.push(order[cursor]);
            cursor += 1;
        }

        let mut tape = Tape::new();
        let mut terms = Vec::with_capacity(batch);
        let mut values = Vec::with_capacity(batch);
        for &i in &picked {
            let loss = model.tagging_loss(&mut tape, &docs[i], &targets[i])?;
            values.push(tape.value(loss).item());
            terms.push((loss, 1.0 / batch as f64));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step,
                sample_ids: picked.iter().map(|i| format!("doc {i}")).collect(),
                losses: values,
            });
        }
        let objective = tape.combine(&terms)?;
        let grads = tape.backward(objective)?;
        let params = model.params_mut();
        params.zero_grad();
        grads.accumulate_into(params);
        clip_grad_norm(params, config.clip_norm);
        opt.step(params);
        history.push(values.iter().sum::<f64>() / batch as f64);
    }
    model.params_mut().zero_grad();
    model.set_stage1_done(true);
    Ok(history)
}
