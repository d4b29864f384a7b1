//! ROUGE-N, ROUGE-L and sentence relative-importance labels.
//!
//! Tokenization is deliberately simple: lowercase, whitespace split, and
//! every punctuation character becomes its own token. There is no stemming
//! and no stopword removal, so scores differ from the official ROUGE
//! toolkit on natural text.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Ordered lowercase tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        Self(tokens.into_iter().map(Into::into).collect())
    }

    /// Whitespace-separated tokens, no further processing.
    pub fn from_words(text: &str) -> Self {
        Self::new(text.split_whitespace())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut word = String::new();
        for ch in chunk.chars() {
            if ch.is_ascii_punctuation() || (!ch.is_alphanumeric() && !ch.is_whitespace()) {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(ch.to_string());
            } else {
                word.extend(ch.to_lowercase());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    TokenSeq(tokens)
}

pub fn is_terminal(token: &str) -> bool {
    matches!(token, "." | "?" | "!")
}

/// Splits text into sentences at terminal punctuation. Terminal marks are
/// dropped and empty sentences are skipped.
pub fn split_sentences(text: &str) -> Vec<TokenSeq> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    for tok in tokenize(text).0 {
        if is_terminal(&tok) {
            if !current.is_empty() {
                out.push(TokenSeq(std::mem::take(&mut current)));
            }
        } else {
            current.push(tok);
        }
    }
    if !current.is_empty() {
        out.push(TokenSeq(current));
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(overlap: usize, cand_total: usize, ref_total: usize) -> Self {
        if cand_total == 0 || ref_total == 0 {
            return Self::default();
        }
        let precision = overlap as f64 / cand_total as f64;
        let recall = overlap as f64 / ref_total as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap as `(overlap, candidate n-grams, reference n-grams)`.
pub fn ngram_overlap(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> (usize, usize, usize) {
    let cand = ngram_counts(&candidate.0, n);
    let refs = ngram_counts(&reference.0, n);
    let overlap = cand
        .iter()
        .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    (
        overlap,
        candidate.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

pub fn rouge_n(candidate: &TokenSeq, reference: &TokenSeq, n: usize) -> Result<RougeScore> {
    if n == 0 {
        return Err(Error::Argument("rouge_n requires n >= 1".into()));
    }
    let (overlap, c, r) = ngram_overlap(candidate, reference, n);
    Ok(RougeScore::from_counts(overlap, c, r))
}

/// Longest common subsequence length, `O(|a|·|b|)` time and `O(|b|)` space.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(candidate: &TokenSeq, reference: &TokenSeq) -> RougeScore {
    let lcs = lcs_len(&candidate.0, &reference.0);
    RougeScore::from_counts(lcs, candidate.len(), reference.len())
}

/// Mean of ROUGE-2 and ROUGE-L f-measures of a sentence against a summary.
pub fn rouge_2l(sentence: &TokenSeq, summary: &TokenSeq) -> f64 {
    let r2 = rouge_n(sentence, summary, 2).expect("n = 2 is valid").f1;
    let rl = rouge_l(sentence, summary).f1;
    (r2 + rl) / 2.0
}

/// Per-sentence saliency: each sentence's `rouge_2l` score normalized over
/// the document. Falls back to uniform scores when no sentence overlaps
/// the summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyLabels {
    pub scores: Vec<f64>,
}

impl SaliencyLabels {
    pub fn uniform(n: usize) -> Self {
        Self {
            scores: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Index of the highest score; ties resolve to the earliest sentence.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }

    /// Labels restricted to the first `n` sentences, renormalized.
    pub fn truncated(&self, n: usize) -> Self {
        if n >= self.scores.len() {
            return self.clone();
        }
        Self::normalize(self.scores[..n].to_vec())
    }

    fn normalize(raw: Vec<f64>) -> Self {
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            Self {
                scores: raw.into_iter().map(|r| r / total).collect(),
            }
        } else {
            Self::uniform(raw.len())
        }
    }
}

pub fn relative_importance(sentences: &[TokenSeq], summary: &TokenSeq) -> Result<SaliencyLabels> {
    if sentences.is_empty() {
        return Err(Error::Argument(
            "relative importance needs at least one sentence".into(),
        ));
    }
    let raw = sentences.iter().map(|s| rouge_2l(s, summary)).collect();
    Ok(SaliencyLabels::normalize(raw))
}

/// Mean f-measures over a set of candidate/reference pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RougeSummary {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

pub fn evaluate_rouge(candidates: &[TokenSeq], references: &[TokenSeq]) -> Result<RougeSummary> {
    if candidates.len() != references.len() {
        return Err(Error::Argument(format!(
            "{} candidates for {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::Argument("no pairs to evaluate".into()));
    }
    let mut acc = RougeSummary::default();
    for (c, r) in candidates.iter().zip(references) {
        acc.rouge1 += rouge_n(c, r, 1)?.f1;
        acc.rouge2 += rouge_n(c, r, 2)?.f1;
        acc.rouge_l += rouge_l(c, r).f1;
    }
    let n = candidates.len() as f64;
    Ok(RougeSummary {
        rouge1: acc.rouge1 / n,
        rouge2: acc.rouge2 / n,
        rouge_l: acc.rouge_l / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::from_words(s)
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(
            tokenize("Hello, World! It's").0,
            vec!["hello", ",", "world", "!", "it", "'", "s"]
        );
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn sentences_split_on_terminal_marks() {
        let s = split_sentences("a b. c d? e!");
        assert_eq!(s, vec![seq("a b"), seq("c d"), seq("e")]);
        assert_eq!(split_sentences("no terminal"), vec![seq("no terminal")]);
        assert!(split_sentences("...").is_empty());
    }

    #[test]
    fn identical_sequences_score_one() {
        let a = seq("the cat sat on the mat");
        assert_eq!(rouge_n(&a, &a, 2).unwrap().f1, 1.0);
        assert_eq!(rouge_l(&a, &a).f1, 1.0);
    }

    #[test]
    fn disjoint_sequences_score_zero() {
        let a = seq("a b c");
        let b = seq("x y z");
        assert_eq!(rouge_n(&a, &b, 2).unwrap(), RougeScore::default());
        assert_eq!(rouge_l(&a, &b).f1, 0.0);
    }

    #[test]
    fn lcs_example() {
        let cand = seq("a b c d");
        let reference = seq("a c d");
        let s = rouge_l(&cand, &reference);
        assert_eq!(lcs_len(&cand.0, &reference.0), 3);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.precision, 0.75);
    }

    #[test]
    fn empty_side_is_all_zero() {
        let a = seq("a b");
        let e = TokenSeq::default();
        assert_eq!(rouge_l(&a, &e), RougeScore::default());
        assert_eq!(rouge_n(&e, &a, 1).unwrap(), RougeScore::default());
        // Too short for any bigram.
        assert_eq!(rouge_n(&seq("a"), &seq("a"), 2).unwrap(), RougeScore::default());
        assert!(rouge_n(&a, &a, 0).is_err());
    }

    #[test]
    fn clipped_overlap() {
        let (o, c, r) = ngram_overlap(&seq("a a a"), &seq("a b"), 1);
        assert_eq!((o, c, r), (1, 3, 2));
    }

    #[test]
    fn relative_importance_edge_cases() {
        assert_eq!(
            relative_importance(&[seq("x y")], &seq("q")).unwrap().scores,
            vec![1.0]
        );
        let uniform = relative_importance(&[seq("a b"), seq("c d"), seq("e")], &seq("z")).unwrap();
        assert_eq!(uniform.scores, vec![1.0 / 3.0; 3]);
        assert!(relative_importance(&[], &seq("a")).is_err());
    }

    #[test]
    fn truncated_labels_renormalize() {
        let l = SaliencyLabels {
            scores: vec![0.5, 0.25, 0.25],
        };
        assert_eq!(l.truncated(2).scores, vec![2.0 / 3.0, 1.0 / 3.0]);
        let zero = SaliencyLabels {
            scores: vec![0.0, 0.0, 1.0],
        };
        assert_eq!(zero.truncated(2).scores, vec![0.5, 0.5]);
    }

    #[test]
    fn evaluate_rouge_contract() {
        let a = vec![seq("a b c"), seq("d e f")];
        let r = evaluate_rouge(&a, &a).unwrap();
        assert_eq!((r.rouge1, r.rouge2, r.rouge_l), (1.0, 1.0, 1.0));
        assert!(evaluate_rouge(&a, &a[..1]).is_err());
    }
}
