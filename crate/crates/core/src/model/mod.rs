//! Micro transformer encoder-decoder with sentence saliency machinery.

pub mod checkpoint;
mod config;
mod framing;
mod generate;
mod transformer;

pub use config::ModelConfig;
pub use framing::FramedDocument;
pub use transformer::{argmax, AttentionTrace, DecodeMode, Encoded, Seq2SeqModel};
