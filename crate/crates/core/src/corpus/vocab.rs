use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
/// Sentence-begin sentinel `<s>`.
pub const BOS_ID: usize = 2;
/// Sentence-end sentinel `</s>`, also the end-of-summary token.
pub const EOS_ID: usize = 3;
/// First decoder input token.
pub const START_ID: usize = 4;

pub const SPECIAL_TOKENS: [&str; 5] = ["<pad>", "<unk>", "<s>", "</s>", "<start>"];

/// Word-level token/id bijection with fixed reserved ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Reserved tokens followed by every distinct token in sorted order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<&str> = tokens
            .into_iter()
            .filter(|t| !SPECIAL_TOKENS.contains(t))
            .collect();
        let all = SPECIAL_TOKENS
            .iter()
            .copied()
            .chain(words)
            .map(String::from)
            .collect();
        Self::from_tokens(all).expect("built vocabulary is a bijection")
    }

    /// Restores a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIAL_TOKENS.len()
            || tokens.iter().zip(SPECIAL_TOKENS).any(|(t, s)| t != s)
        {
            return Err(Error::Argument(
                "vocabulary must start with the reserved tokens".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Argument(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Argument(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(SPECIAL_TOKENS[UNK_ID]).to_string())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_are_fixed() {
        let v = Vocabulary::build(["b", "a", "a", "</s>"]);
        assert_eq!(v.len(), 7);
        assert_eq!(v.token(EOS_ID), Some("</s>"));
        assert_eq!(v.token(START_ID), Some("<start>"));
        assert_eq!(v.id("a"), 5);
        assert_eq!(v.id("b"), 6);
        assert_eq!(v.id("zzz"), UNK_ID);
    }

    #[test]
    fn from_tokens_rejects_bad_lists() {
        assert!(Vocabulary::from_tokens(vec!["x".into()]).is_err());
        let mut toks: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        toks.push("a".into());
        toks.push("a".into());
        assert!(Vocabulary::from_tokens(toks).is_err());
    }
}
