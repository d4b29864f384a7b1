//! Greedy and beam-search decoding.

use std::cmp::Ordering;

use super::framing::FramedDocument;
use super::transformer::{argmax, DecodeMode, Seq2SeqModel};
use crate::autodiff::{log_softmax, Tape};
use crate::corpus::vocab::START_ID;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Hypothesis {
    tokens: Vec<usize>,
    logp: f64,
}

impl Hypothesis {
    /// Length-normalized log-probability.
    fn score(&self) -> f64 {
        if self.tokens.is_empty() {
            0.0
        } else {
            self.logp / self.tokens.len() as f64
        }
    }
}

/// Higher score first, then lexicographically smaller token ids.
fn rank(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score()
        .partial_cmp(&a.score())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

pub(super) fn generate(
    model: &Seq2SeqModel,
    doc: &FramedDocument,
    mode: DecodeMode,
    max_new_tokens: usize,
) -> Result<Vec<usize>> {
    if let DecodeMode::Beam(0) = mode {
        return Err(Error::Argument("beam size must be at least 1".into()));
    }
    if max_new_tokens == 0 {
        return Ok(Vec::new());
    }
    // The prefix includes the start token and must fit the position table.
    let max_new_tokens = max_new_tokens.min(model.config().max_len - 1);
    let eos = model.eos_id();
    let mut tape = Tape::new();
    let enc = model.encode(&mut tape, doc)?;
    let next_logits = |tape: &mut Tape, tokens: &[usize]| -> Result<Vec<f64>> {
        let mut prefix = Vec::with_capacity(tokens.len() + 1);
        prefix.push(START_ID);
        prefix.extend_from_slice(tokens);
        let logits = model.decode_logits(tape, &prefix, &enc, None)?;
        let v = tape.value(logits);
        let (rows, _) = v.dims2();
        Ok(v.row(rows - 1).to_vec())
    };

    match mode {
        DecodeMode::Greedy => {
            let mut out = Vec::new();
            while out.len() < max_new_tokens {
                let next = argmax(&next_logits(&mut tape, &out)?);
                if next == eos {
                    break;
                }
                out.push(next);
            }
            Ok(out)
        }
        DecodeMode::Beam(k) => {
            let mut live = vec![Hypothesis {
                tokens: Vec::new(),
                logp: 0.0,
            }];
            let mut finished: Vec<Hypothesis> = Vec::new();
            for _ in 0..max_new_tokens {
                let mut candidates = Vec::new();
                for h in &live {
                    let lp = log_softmax(&next_logits(&mut tape, &h.tokens)?);
                    for (tok, l) in lp.into_iter().enumerate() {
                        let mut tokens = h.tokens.clone();
                        tokens.push(tok);
                        candidates.push(Hypothesis {
                            tokens,
                            logp: h.logp + l,
                        });
                    }
                }
                candidates.sort_by(rank);
                live.clear();
                for c in candidates.into_iter().take(k) {
                    if c.tokens.last() == Some(&eos) {
                        finished.push(c);
                    } else {
                        live.push(c);
                    }
                }
                if live.is_empty() || finished.len() >= k {
                    break;
                }
            }
            finished.extend(live);
            finished.sort_by(rank);
            let mut best = finished.into_iter().next().map(|h| h.tokens).unwrap_or_default();
            if best.last() == Some(&eos) {
                best.pop();
            }
            Ok(best)
        }
    }
}
