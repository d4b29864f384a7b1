//! Portable text checkpoints.
//!
//! Layout, one item per line:
//!
//! ```text
//! currsum-checkpoint 1
//! config vocab_size=<n> d_model=<n> n_heads=<n> enc_layers=<n> dec_layers=<n> ffn_dim=<n> max_len=<n> sentence_attention=<bool>
//! stage1_done <bool>
//! vocab <count>
//! <token>                         (count lines, in id order)
//! params <count>
//! param <name> <requires_grad 0|1> <dim>x<dim>…
//! <value> <value> …               (row-major, shortest round-trip exponent form)
//! …                               (param/value line pairs, count times)
//! end
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so a save
//! followed by a load restores every parameter bit for bit.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::config::ModelConfig;
use super::transformer::Seq2SeqModel;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &str = "currsum-checkpoint";
const VERSION: u32 = 1;

pub fn to_string(model: &Seq2SeqModel, vocab: &Vocabulary) -> String {
    let c = model.config();
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION}").unwrap();
    writeln!(
        out,
        "config vocab_size={} d_model={} n_heads={} enc_layers={} dec_layers={} ffn_dim={} max_len={} sentence_attention={}",
        c.vocab_size, c.d_model, c.n_heads, c.enc_layers, c.dec_layers, c.ffn_dim, c.max_len, c.sentence_attention
    )
    .unwrap();
    writeln!(out, "stage1_done {}", model.stage1_done()).unwrap();
    writeln!(out, "vocab {}", vocab.len()).unwrap();
    for t in vocab.tokens() {
        writeln!(out, "{t}").unwrap();
    }
    writeln!(out, "params {}", model.params().len()).unwrap();
    for (_, p) in model.params().iter() {
        let dims: Vec<String> = p.value.shape().iter().map(usize::to_string).collect();
        writeln!(out, "param {} {} {}", p.name, u8::from(p.requires_grad), dims.join("x")).unwrap();
        let values: Vec<String> = p.value.data().iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", values.join(" ")).unwrap();
    }
    writeln!(out, "end").unwrap();
    out
}

/// Writes atomically: temp file in the target directory, then rename.
pub fn save(model: &Seq2SeqModel, vocab: &Vocabulary, path: &Path) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(to_string(model, vocab).as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Seq2SeqModel, Vocabulary)> {
    from_str(&std::fs::read_to_string(path)?)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn from_str(text: &str) -> Result<(Seq2SeqModel, Vocabulary)> {
    let mut lines = text.lines();
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(format!("truncated before {what}")));

    let header = next("header")?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(bad(format!("unsupported header {header:?}")));
    }

    let config_line = next("config")?;
    let fields = config_line
        .strip_prefix("config ")
        .ok_or_else(|| bad("missing config line"))?;
    let mut config = ModelConfig::new(0);
    let mut seen = 0;
    for kv in fields.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("bad config field {kv}")))?;
        let num = || v.parse::<usize>().map_err(|_| bad(format!("bad value for {k}")));
        match k {
            "vocab_size" => config.vocab_size = num()?,
            "d_model" => config.d_model = num()?,
            "n_heads" => config.n_heads = num()?,
            "enc_layers" => config.enc_layers = num()?,
            "dec_layers" => config.dec_layers = num()?,
            "ffn_dim" => config.ffn_dim = num()?,
            "max_len" => config.max_len = num()?,
            "sentence_attention" => {
                config.sentence_attention = v.parse().map_err(|_| bad("bad sentence_attention"))?
            }
            other => return Err(bad(format!("unknown config field {other}"))),
        }
        seen += 1;
    }
    if seen != 8 {
        return Err(bad("incomplete config line"));
    }

    let stage1_done: bool = next("stage1_done")?
        .strip_prefix("stage1_done ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("bad stage1_done line"))?;

    let vocab_count: usize = next("vocab")?
        .strip_prefix("vocab ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("bad vocab line"))?;
    let mut tokens = Vec::with_capacity(vocab_count);
    for _ in 0..vocab_count {
        tokens.push(next("vocab token")?.to_string());
    }
    let vocab = Vocabulary::from_tokens(tokens).map_err(|e| bad(e.to_string()))?;
    if vocab.len() != config.vocab_size {
        return Err(bad("vocabulary size does not match config"));
    }

    let mut model = Seq2SeqModel::new(config, 0).map_err(|e| bad(e.to_string()))?;
    model.set_stage1_done(stage1_done);
    let count: usize = next("params")?
        .strip_prefix("params ")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("bad params line"))?;
    if count != model.params().len() {
        return Err(bad(format!(
            "checkpoint has {count} parameters, architecture expects {}",
            model.params().len()
        )));
    }
    for _ in 0..count {
        let head = next("param header")?;
        let parts: Vec<&str> = head.split(' ').collect();
        let [tag, name, rg, dims] = parts[..] else {
            return Err(bad(format!("bad param header {head:?}")));
        };
        if tag != "param" {
            return Err(bad(format!("bad param header {head:?}")));
        }
        let shape: Vec<usize> = dims
            .split('x')
            .map(|d| d.parse().map_err(|_| bad(format!("bad shape for {name}"))))
            .collect::<Result<_>>()?;
        let values: Vec<f64> = next("param values")?
            .split(' ')
            .map(|v| v.parse().map_err(|_| bad(format!("bad value in {name}"))))
            .collect::<Result<_>>()?;
        let id = model
            .params()
            .find(name)
            .ok_or_else(|| bad(format!("unexpected parameter {name}")))?;
        let p = model.params_mut().get_mut(id);
        if p.value.shape() != shape.as_slice() || p.value.len() != values.len() {
            return Err(bad(format!("shape mismatch for {name}")));
        }
        p.value.data_mut().copy_from_slice(&values);
        p.requires_grad = rg == "1";
    }
    if next("end")? != "end" {
        return Err(bad("missing end marker"));
    }
    Ok((model, vocab))
}
