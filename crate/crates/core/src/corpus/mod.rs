//! Dataset ingestion, framing, saliency labels and synthetic corpora.

mod jsonl;
mod labels;
mod synthetic;
pub mod vocab;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use jsonl::{load_jsonl, parse_jsonl, LoadedCorpus, MalformedLine};
pub use labels::{
    cached_labels, label_corpus, label_example, read_labels, write_labels, CacheStatus, LabelSet,
};
pub use synthetic::{generate_synthetic, SyntheticCorpus, SyntheticSpec, Task, MARKER};
pub use vocab::Vocabulary;

use crate::error::{Error, Result};
use crate::model::FramedDocument;
use crate::textmetrics::{split_sentences, tokenize, TokenSeq};

/// One source document with its reference summary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub source: String,
    pub summary: String,
}

impl Example {
    pub fn new(id: impl Into<String>, source: impl Into<String>, summary: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            summary: summary.into(),
        }
    }

    pub fn source_sentences(&self) -> Vec<TokenSeq> {
        split_sentences(&self.source)
    }

    /// Summary tokens used as the generation target and ROUGE reference.
    pub fn summary_tokens(&self) -> TokenSeq {
        tokenize(&self.summary)
    }
}

/// Source framed for the encoder plus the decoder target
/// `[<start>, y₁ … yₙ, </s>]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramedExample {
    pub id: String,
    pub doc: FramedDocument,
    pub target: Vec<usize>,
}

/// Word vocabulary over sources and summaries of a training split.
pub fn build_vocabulary(examples: &[Example]) -> Vocabulary {
    let mut tokens: Vec<String> = Vec::new();
    for ex in examples {
        tokens.extend(ex.source_sentences().into_iter().flat_map(|s| s.0));
        tokens.extend(ex.summary_tokens().0);
    }
    Vocabulary::build(tokens.iter().map(String::as_str))
}

/// Frames one example. Sources are cut to whole sentences within
/// `max_len`; targets are cut so the decoder input fits `max_len`.
pub fn frame(example: &Example, vocab: &Vocabulary, max_len: usize) -> Result<FramedExample> {
    let sentences: Vec<Vec<usize>> = example
        .source_sentences()
        .iter()
        .map(|s| vocab.encode(&s.0))
        .collect();
    if sentences.is_empty() {
        return Err(Error::Corpus(format!(
            "example {} has no extractable sentences",
            example.id
        )));
    }
    let doc = FramedDocument::from_sentences(&sentences)?.truncated(max_len);
    let mut summary = vocab.encode(&example.summary_tokens().0);
    summary.truncate(max_len.saturating_sub(1));
    let mut target = Vec::with_capacity(summary.len() + 2);
    target.push(vocab::START_ID);
    target.extend(summary);
    target.push(vocab::EOS_ID);
    Ok(FramedExample {
        id: example.id.clone(),
        doc,
        target,
    })
}

/// Frames a corpus, reporting examples that could not be framed.
pub fn frame_corpus(
    examples: &[Example],
    vocab: &Vocabulary,
    max_len: usize,
) -> (Vec<FramedExample>, Vec<(String, String)>) {
    let mut framed = Vec::with_capacity(examples.len());
    let mut skipped = Vec::new();
    for ex in examples {
        match frame(ex, vocab, max_len) {
            Ok(f) => framed.push(f),
            Err(e) => skipped.push((ex.id.clone(), e.to_string())),
        }
    }
    (framed, skipped)
}

/// Git-style content hash: SHA-256 over `blob <len>\0<canonical bytes>`,
/// where the canonical bytes list every example's fields length-prefixed
/// in corpus order.
pub fn corpus_hash(examples: &[Example]) -> String {
    let mut body = Vec::new();
    for ex in examples {
        for field in [&ex.id, &ex.source, &ex.summary] {
            body.extend_from_slice(field.len().to_string().as_bytes());
            body.push(b':');
            body.extend_from_slice(field.as_bytes());
        }
        body.push(b'\n');
    }
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", body.len()).as_bytes());
    hasher.update(&body);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::vocab::{BOS_ID, EOS_ID, START_ID};

    #[test]
    fn frame_matches_sentinel_pattern() {
        let ex = Example::new("1", "a b. c d.", "c d.");
        let vocab = build_vocabulary(std::slice::from_ref(&ex));
        let f = frame(&ex, &vocab, 64).unwrap();
        let (a, b, c, d) = (vocab.id("a"), vocab.id("b"), vocab.id("c"), vocab.id("d"));
        assert_eq!(
            f.doc.token_ids(),
            &[BOS_ID, a, b, EOS_ID, BOS_ID, c, d, EOS_ID]
        );
        assert_eq!(f.doc.eos_positions(), &[3, 7]);
        assert_eq!(f.target, vec![START_ID, c, d, vocab.id("."), EOS_ID]);
    }

    #[test]
    fn single_word_source() {
        let ex = Example::new("1", "hello", "hello");
        let vocab = build_vocabulary(std::slice::from_ref(&ex));
        let f = frame(&ex, &vocab, 64).unwrap();
        assert_eq!(f.doc.sentence_count(), 1);
        assert_eq!(f.doc.eos_positions(), &[2]);
    }

    #[test]
    fn unframeable_sources_are_reported() {
        let good = Example::new("1", "a b.", "a");
        let bad = Example::new("2", "?!", "a");
        let vocab = build_vocabulary(&[good.clone()]);
        let (framed, skipped) = frame_corpus(&[good, bad], &vocab, 64);
        assert_eq!(framed.len(), 1);
        assert_eq!(skipped[0].0, "2");
    }

    #[test]
    fn hash_tracks_content() {
        let a = vec![Example::new("1", "a b.", "a")];
        let mut b = a.clone();
        assert_eq!(corpus_hash(&a), corpus_hash(&b));
        b[0].summary.push('x');
        assert_ne!(corpus_hash(&a), corpus_hash(&b));
        assert_eq!(corpus_hash(&a).len(), 64);
    }
}
