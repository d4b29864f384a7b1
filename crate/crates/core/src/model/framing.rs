use crate::corpus::vocab::{BOS_ID, EOS_ID};
use crate::error::{Error, Result};

/// Source token ids framed as `<s> sent₁ </s><s> sent₂ </s> …`, with the
/// positions of every `</s>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramedDocument {
    token_ids: Vec<usize>,
    eos_positions: Vec<usize>,
}

impl FramedDocument {
    /// Frames sentences of word ids. Empty sentences are rejected.
    pub fn from_sentences(sentences: &[Vec<usize>]) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::Argument("document has no sentences".into()));
        }
        let mut token_ids = Vec::new();
        let mut eos_positions = Vec::with_capacity(sentences.len());
        for s in sentences {
            if s.is_empty() {
                return Err(Error::Argument("empty sentence".into()));
            }
            token_ids.push(BOS_ID);
            token_ids.extend_from_slice(s);
            eos_positions.push(token_ids.len());
            token_ids.push(EOS_ID);
        }
        Ok(Self {
            token_ids,
            eos_positions,
        })
    }

    /// Validates an already framed sequence.
    pub fn new(token_ids: Vec<usize>, eos_positions: Vec<usize>) -> Result<Self> {
        if eos_positions.is_empty() {
            return Err(Error::Argument("framed document needs a sentence".into()));
        }
        if eos_positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("eos positions must increase strictly".into()));
        }
        if eos_positions.iter().any(|&p| token_ids.get(p) != Some(&EOS_ID)) {
            return Err(Error::Argument(
                "eos position does not index a sentence-end token".into(),
            ));
        }
        Ok(Self {
            token_ids,
            eos_positions,
        })
    }

    pub fn token_ids(&self) -> &[usize] {
        &self.token_ids
    }

    pub fn eos_positions(&self) -> &[usize] {
        &self.eos_positions
    }

    pub fn sentence_count(&self) -> usize {
        self.eos_positions.len()
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Word ids of each sentence, sentinels stripped.
    pub fn sentences(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.eos_positions.len());
        let mut start = 0;
        for &end in &self.eos_positions {
            out.push(
                self.token_ids[start..end]
                    .iter()
                    .copied()
                    .filter(|&t| t != BOS_ID)
                    .collect(),
            );
            start = end + 1;
        }
        out
    }

    /// Keeps whole sentences that fit in `max_len` tokens. If not even the
    /// first sentence fits, it is cut and re-terminated so that at least one
    /// sentence survives.
    pub fn truncated(&self, max_len: usize) -> Self {
        if self.token_ids.len() <= max_len {
            return self.clone();
        }
        let kept = self.eos_positions.iter().take_while(|&&p| p < max_len).count();
        if kept > 0 {
            let end = self.eos_positions[kept - 1] + 1;
            return Self {
                token_ids: self.token_ids[..end].to_vec(),
                eos_positions: self.eos_positions[..kept].to_vec(),
            };
        }
        let keep_words = max_len.saturating_sub(2).max(1);
        let mut token_ids: Vec<usize> = self.token_ids[..1 + keep_words].to_vec();
        token_ids.push(EOS_ID);
        let eos = token_ids.len() - 1;
        Self {
            token_ids,
            eos_positions: vec![eos],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_positions() {
        // "a b. c d." with a=10, b=11, c=12, d=13
        let doc = FramedDocument::from_sentences(&[vec![10, 11], vec![12, 13]]).unwrap();
        assert_eq!(
            doc.token_ids(),
            &[BOS_ID, 10, 11, EOS_ID, BOS_ID, 12, 13, EOS_ID]
        );
        assert_eq!(doc.eos_positions(), &[3, 7]);
        assert_eq!(doc.sentences(), vec![vec![10, 11], vec![12, 13]]);
    }

    #[test]
    fn truncation_drops_partial_sentences() {
        let doc = FramedDocument::from_sentences(&[vec![10, 11], vec![12, 13, 14]]).unwrap();
        let t = doc.truncated(6);
        assert_eq!(t.eos_positions(), &[3]);
        assert_eq!(t.len(), 4);
        let cut = doc.truncated(3);
        assert_eq!(cut.token_ids(), &[BOS_ID, 10, EOS_ID]);
        assert_eq!(cut.sentence_count(), 1);
        assert_eq!(doc.truncated(100), doc);
    }

    #[test]
    fn validation() {
        assert!(FramedDocument::new(vec![BOS_ID, 10, EOS_ID], vec![2]).is_ok());
        assert!(FramedDocument::new(vec![BOS_ID, 10, EOS_ID], vec![1]).is_err());
        assert!(FramedDocument::new(vec![BOS_ID, 10, EOS_ID], vec![]).is_err());
        assert!(FramedDocument::from_sentences(&[vec![]]).is_err());
    }
}
