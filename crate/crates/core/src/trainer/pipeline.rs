//! End-to-end run: framing, labels, both stages.

use super::report::TrainingReport;
use super::stage1::stage1_finetune;
use super::stage2::{stage2_train, EvalSet};
use super::TrainConfig;
use crate::corpus::{build_vocabulary, corpus_hash, frame_corpus, label_corpus, Example};
use crate::corpus::{FramedExample, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Seq2SeqModel};
use crate::textmetrics::SaliencyLabels;

/// Everything derived from the raw corpus that a run needs.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub train: Vec<FramedExample>,
    /// Saliency labels aligned with `train`.
    pub labels: Vec<SaliencyLabels>,
    pub val: EvalSet,
    /// `(id, reason)` for training examples that could not be framed.
    pub skipped: Vec<(String, String)>,
    pub corpus_hash: String,
}

/// Builds the vocabulary from `train`, frames both splits and labels the
/// training documents.
pub fn prepare(train: &[Example], val: &[Example], max_len: usize) -> Result<PreparedData> {
    let vocab = build_vocabulary(train);
    let (framed, skipped) = frame_corpus(train, &vocab, max_len);
    if framed.is_empty() {
        return Err(Error::Corpus("no usable training examples".into()));
    }
    let label_set = label_corpus(train);
    let labels = framed
        .iter()
        .map(|f| {
            label_set
                .get(&f.id)
                .cloned()
                .ok_or_else(|| Error::Corpus(format!("no labels for example {}", f.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut all = train.to_vec();
    all.extend_from_slice(val);
    Ok(PreparedData {
        val: EvalSet::new(val, &vocab, max_len),
        vocab,
        train: framed,
        labels,
        skipped,
        corpus_hash: corpus_hash(&all),
    })
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub model: Seq2SeqModel,
    pub report: TrainingReport,
    /// Per-step tagging MSE, empty for regimes without the tagging stage.
    pub stage1_mse: Vec<f64>,
}

/// Builds a model for the regime (sentence attention on or off, vocabulary
/// size from the data) and runs both stages.
pub fn run_pipeline(
    data: &PreparedData,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<RunOutcome> {
    let mut mc = model_config.clone();
    mc.vocab_size = data.vocab.len();
    mc.sentence_attention = config.regime.uses_sentence_attention();
    let mut model = Seq2SeqModel::new(mc, config.seed)?;
    let docs: Vec<_> = data.train.iter().map(|f| f.doc.clone()).collect();
    let stage1_mse = stage1_finetune(&mut model, &docs, &data.labels, config)?;
    let report = stage2_train(&mut model, &data.train, &data.val, &data.vocab, config)?;
    Ok(RunOutcome {
        model,
        report,
        stage1_mse,
    })
}
