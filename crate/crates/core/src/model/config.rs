use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub ffn_dim: usize,
    pub max_len: usize,
    /// Adds a sentence cross-attention sublayer to every decoder layer.
    pub sentence_attention: bool,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            d_model: 64,
            n_heads: 4,
            enc_layers: 2,
            dec_layers: 2,
            ffn_dim: 128,
            max_len: 256,
            sentence_attention: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("enc_layers", self.enc_layers),
            ("dec_layers", self.dec_layers),
            ("ffn_dim", self.ffn_dim),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if self.n_heads > 0 && self.d_model % self.n_heads != 0 {
            problems.push(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.max_len < 3 {
            problems.push("max_len must leave room for a framed sentence".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}
