//! Desk-scale sequence-to-sequence summarization with a confidence-aware
//! curriculum loss and sentence-saliency cross-attention.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: reverse-mode differentiation over `f64` tensors.
//! - [`textmetrics`]: ROUGE-N / ROUGE-L and per-sentence saliency labels.
//! - [`curriculum`]: Lambert W, closed-form confidence and the SuperLoss.
//! - [`model`]: micro encoder-decoder with a sentence tagging head and a
//!   sentence cross-attention sublayer in every decoder layer.
//! - [`corpus`]: ingestion, vocabulary, sentence framing, labels and
//!   synthetic corpora.
//! - [`trainer`]: two-stage fine-tuning and regime comparison.

pub mod autodiff;
pub mod corpus;
pub mod curriculum;
pub mod error;
pub mod model;
pub mod rng;
pub mod textmetrics;
pub mod trainer;

pub use error::{Error, Result};
