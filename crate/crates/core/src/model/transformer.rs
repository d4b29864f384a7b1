//! Pre-norm encoder-decoder with a sentence tagging head.
//!
//! Decoder layer sublayers, each `x + f(LayerNorm(x))`:
//!
//! 1. causal self-attention
//! 2. cross-attention over encoder token states
//! 3. sentence cross-attention over the sentence bank (optional)
//! 4. feed-forward
//!
//! The sentence bank holds the final encoder states at every `</s>`
//! position. During tagging, the same sentence-attention sublayers run as
//! self-attention over the bank before the sigmoid head.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::framing::FramedDocument;
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::corpus::vocab::{EOS_ID, PAD_ID, START_ID};
use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

#[derive(Clone, Copy, Debug)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Clone, Copy, Debug)]
struct FeedForward {
    fc1: Linear,
    fc2: Linear,
}

#[derive(Clone, Copy, Debug)]
struct EncoderLayer {
    ln_attn: Norm,
    attn: Attention,
    ln_ffn: Norm,
    ffn: FeedForward,
}

#[derive(Clone, Copy, Debug)]
struct SentenceAttention {
    ln: Norm,
    attn: Attention,
}

#[derive(Clone, Copy, Debug)]
struct DecoderLayer {
    ln_self: Norm,
    self_attn: Attention,
    ln_cross: Norm,
    cross_attn: Attention,
    sentence: Option<SentenceAttention>,
    ln_ffn: Norm,
    ffn: FeedForward,
}

/// Encoder output for one document.
#[derive(Clone, Copy, Debug)]
pub struct Encoded {
    /// `len × d_model`
    pub token_states: Var,
    /// `sentence_count × d_model`, rows gathered at `</s>` positions.
    pub bank: Var,
}

/// Attention weights captured during a decoder pass, indexed
/// `[layer][head]`, each `queries × keys`.
#[derive(Clone, Debug, Default)]
pub struct AttentionTrace {
    pub self_attn: Vec<Vec<Tensor>>,
    pub cross_attn: Vec<Vec<Tensor>>,
    pub sentence_attn: Vec<Vec<Tensor>>,
}

#[derive(Clone, Debug)]
pub struct Seq2SeqModel {
    config: ModelConfig,
    params: ParamStore,
    embed: ParamId,
    encoder: Vec<EncoderLayer>,
    enc_norm: Norm,
    decoder: Vec<DecoderLayer>,
    dec_norm: Norm,
    tag_head: Linear,
    positions: Vec<f64>,
    stage1_done: bool,
}

struct Init<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Init<'_> {
    fn uniform(&mut self, name: String, shape: &[usize], bound: f64) -> ParamId {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| self.rng.gen_range(-bound..bound)).collect();
        self.store
            .add(name, Tensor::new(shape.to_vec(), data).expect("valid init shape"))
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Linear {
            w: self.uniform(format!("{name}.w"), &[fan_in, fan_out], bound),
            b: self.store.add(format!("{name}.b"), Tensor::zeros(&[fan_out])),
        }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            gamma: self.store.add(format!("{name}.gamma"), Tensor::filled(&[d], 1.0)),
            beta: self.store.add(format!("{name}.beta"), Tensor::zeros(&[d])),
        }
    }

    fn attention(&mut self, name: &str, d: usize) -> Attention {
        Attention {
            q: self.linear(&format!("{name}.q"), d, d),
            k: self.linear(&format!("{name}.k"), d, d),
            v: self.linear(&format!("{name}.v"), d, d),
            o: self.linear(&format!("{name}.o"), d, d),
        }
    }

    fn ffn(&mut self, name: &str, d: usize, hidden: usize) -> FeedForward {
        FeedForward {
            fc1: self.linear(&format!("{name}.fc1"), d, hidden),
            fc2: self.linear(&format!("{name}.fc2"), hidden, d),
        }
    }
}

fn sinusoidal_positions(max_len: usize, d: usize) -> Vec<f64> {
    let mut table = vec![0.0; max_len * d];
    for pos in 0..max_len {
        for i in 0..d {
            let exponent = (2 * (i / 2)) as f64 / d as f64;
            let angle = pos as f64 / 10_000f64.powf(exponent);
            table[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    table
}

impl Seq2SeqModel {
    /// Seeded initialization. Parameters shared by every variant come from
    /// one substream and sentence-attention parameters from another, so a
    /// model with sentence attention disabled is parameter-for-parameter
    /// identical to the shared part of one with it enabled.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let mut params = ParamStore::new();
        let mut init = Init {
            store: &mut params,
            rng: substream(seed, Stream::Init),
        };
        let embed = init.uniform("embed".into(), &[config.vocab_size, d], 1.0 / (d as f64).sqrt());
        let encoder: Vec<EncoderLayer> = (0..config.enc_layers)
            .map(|l| EncoderLayer {
                ln_attn: init.norm(&format!("enc.{l}.ln_attn"), d),
                attn: init.attention(&format!("enc.{l}.attn"), d),
                ln_ffn: init.norm(&format!("enc.{l}.ln_ffn"), d),
                ffn: init.ffn(&format!("enc.{l}.ffn"), d, config.ffn_dim),
            })
            .collect();
        let enc_norm = init.norm("enc.ln_final", d);
        let mut decoder: Vec<DecoderLayer> = (0..config.dec_layers)
            .map(|l| DecoderLayer {
                ln_self: init.norm(&format!("dec.{l}.ln_self"), d),
                self_attn: init.attention(&format!("dec.{l}.self_attn"), d),
                ln_cross: init.norm(&format!("dec.{l}.ln_cross"), d),
                cross_attn: init.attention(&format!("dec.{l}.cross_attn"), d),
                sentence: None,
                ln_ffn: init.norm(&format!("dec.{l}.ln_ffn"), d),
                ffn: init.ffn(&format!("dec.{l}.ffn"), d, config.ffn_dim),
            })
            .collect();
        let dec_norm = init.norm("dec.ln_final", d);
        let tag_head = init.linear("tag.head", d, 1);

        if config.sentence_attention {
            let mut init = Init {
                store: &mut params,
                rng: substream(seed, Stream::InitSentence),
            };
            for (l, layer) in decoder.iter_mut().enumerate() {
                layer.sentence = Some(SentenceAttention {
                    ln: init.norm(&format!("dec.{l}.ln_sent"), d),
                    attn: init.attention(&format!("dec.{l}.sent_attn"), d),
                });
            }
        }

        let positions = sinusoidal_positions(config.max_len, d);
        Ok(Self {
            config,
            params,
            embed,
            encoder,
            enc_norm,
            decoder,
            dec_norm,
            tag_head,
            positions,
            stage1_done: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn stage1_done(&self) -> bool {
        self.stage1_done
    }

    pub fn set_stage1_done(&mut self, done: bool) {
        self.stage1_done = done;
    }

    /// Encoder, shared embedding and sentence-attention parameters: the
    /// part trained by sentence tagging.
    pub fn pretrained_param_ids(&self) -> Vec<ParamId> {
        self.params
            .iter()
            .filter(|(_, p)| is_pretrained_name(&p.name))
            .map(|(id, _)| id)
            .collect()
    }

    /// Every `dec.*` parameter outside the sentence-attention sublayers.
    pub fn decoder_param_ids(&self) -> Vec<ParamId> {
        self.params
            .iter()
            .filter(|(_, p)| p.name.starts_with("dec.") && !is_pretrained_name(&p.name))
            .map(|(id, _)| id)
            .collect()
    }

    pub fn tag_head_param_ids(&self) -> Vec<ParamId> {
        vec![self.tag_head.w, self.tag_head.b]
    }

    /// Output projection of the sentence-attention sublayer in each decoder
    /// layer, empty when the sublayer is disabled.
    pub fn sentence_output_param_ids(&self) -> Vec<ParamId> {
        self.decoder
            .iter()
            .filter_map(|l| l.sentence)
            .flat_map(|s| [s.attn.o.w, s.attn.o.b])
            .collect()
    }

    fn linear(&self, tape: &mut Tape, lin: Linear, x: Var) -> Result<Var> {
        let w = tape.param(&self.params, lin.w);
        let b = tape.param(&self.params, lin.b);
        let xw = tape.matmul(x, w)?;
        tape.add_bias(xw, b)
    }

    fn norm(&self, tape: &mut Tape, norm: Norm, x: Var) -> Result<Var> {
        let g = tape.param(&self.params, norm.gamma);
        let b = tape.param(&self.params, norm.beta);
        tape.layer_norm(x, g, b, LN_EPS)
    }

    fn feed_forward(&self, tape: &mut Tape, ffn: FeedForward, x: Var) -> Result<Var> {
        let h = self.linear(tape, ffn.fc1, x)?;
        let h = tape.gelu(h);
        self.linear(tape, ffn.fc2, h)
    }

    fn attend(
        &self,
        tape: &mut Tape,
        attn: Attention,
        queries: Var,
        keys: Var,
        causal: bool,
        capture: bool,
    ) -> Result<(Var, Vec<Tensor>)> {
        let q = self.linear(tape, attn.q, queries)?;
        let k = self.linear(tape, attn.k, keys)?;
        let v = self.linear(tape, attn.v, keys)?;
        let dh = self.config.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut heads = Vec::with_capacity(self.config.n_heads);
        let mut captured = Vec::new();
        for h in 0..self.config.n_heads {
            let qh = tape.slice_cols(q, h * dh, dh)?;
            let kh = tape.slice_cols(k, h * dh, dh)?;
            let vh = tape.slice_cols(v, h * dh, dh)?;
            let scores = tape.matmul_nt(qh, kh)?;
            let scores = tape.scale(scores, scale);
            let weights = if causal {
                tape.causal_softmax(scores)?
            } else {
                tape.softmax(scores, 1)?
            };
            if capture {
                captured.push(tape.value(weights).clone());
            }
            heads.push(tape.matmul(weights, vh)?);
        }
        let merged = if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat_cols(&heads)?
        };
        Ok((self.linear(tape, attn.o, merged)?, captured))
    }

    fn embed_tokens(&self, tape: &mut Tape, ids: &[usize]) -> Result<Var> {
        let d = self.config.d_model;
        if ids.len() > self.config.max_len {
            return Err(Error::Argument(format!(
                "sequence of {} tokens exceeds max_len {}",
                ids.len(),
                self.config.max_len
            )));
        }
        let table = tape.param(&self.params, self.embed);
        let x = tape.gather_rows(table, ids)?;
        let x = tape.scale(x, (d as f64).sqrt());
        let pe = Tensor::matrix(ids.len(), d, self.positions[..ids.len() * d].to_vec())?;
        let pe = tape.constant(pe);
        tape.add(x, pe)
    }

    /// Runs the encoder. Documents longer than `max_len` are truncated to
    /// whole sentences first.
    pub fn encode(&self, tape: &mut Tape, doc: &FramedDocument) -> Result<Encoded> {
        let truncated;
        let doc = if doc.len() > self.config.max_len {
            truncated = doc.truncated(self.config.max_len);
            &truncated
        } else {
            doc
        };
        let mut x = self.embed_tokens(tape, doc.token_ids())?;
        for layer in &self.encoder {
            let h = self.norm(tape, layer.ln_attn, x)?;
            let (h, _) = self.attend(tape, layer.attn, h, h, false, false)?;
            x = tape.add(x, h)?;
            let h = self.norm(tape, layer.ln_ffn, x)?;
            let h = self.feed_forward(tape, layer.ffn, h)?;
            x = tape.add(x, h)?;
        }
        let token_states = self.norm(tape, self.enc_norm, x)?;
        let bank = tape.gather_rows(token_states, doc.eos_positions())?;
        Ok(Encoded { token_states, bank })
    }

    /// Sigmoid saliency score per bank row, shape `sentences × 1`.
    pub fn tag_bank(&self, tape: &mut Tape, bank: Var) -> Result<Var> {
        let mut h = bank;
        for layer in &self.decoder {
            if let Some(sent) = layer.sentence {
                let n = self.norm(tape, sent.ln, h)?;
                let (a, _) = self.attend(tape, sent.attn, n, n, false, false)?;
                h = tape.add(h, a)?;
            }
        }
        let logits = self.linear(tape, self.tag_head, h)?;
        Ok(tape.sigmoid(logits))
    }

    pub fn tag_sentences(&self, doc: &FramedDocument) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, doc)?;
        let scores = self.tag_bank(&mut tape, enc.bank)?;
        Ok(tape.value(scores).data().to_vec())
    }

    /// MSE between tagging scores and saliency labels.
    pub fn tagging_loss(&self, tape: &mut Tape, doc: &FramedDocument, labels: &[f64]) -> Result<Var> {
        let enc = self.encode(tape, doc)?;
        let scores = self.tag_bank(tape, enc.bank)?;
        if labels.len() != tape.value(scores).len() {
            return Err(Error::Shape {
                op: "tagging_loss",
                lhs: tape.shape(scores).to_vec(),
                rhs: vec![labels.len()],
            });
        }
        let target = tape.constant(Tensor::matrix(labels.len(), 1, labels.to_vec())?);
        tape.mse(scores, target)
    }

    /// Vocabulary logits for every prefix position, `len × vocab`.
    pub fn decode_logits(
        &self,
        tape: &mut Tape,
        prefix: &[usize],
        enc: &Encoded,
        mut trace: Option<&mut AttentionTrace>,
    ) -> Result<Var> {
        if prefix.is_empty() {
            return Err(Error::Argument(
                "decoder prefix must start with the decode-start token".into(),
            ));
        }
        let capture = trace.is_some();
        let mut y = self.embed_tokens(tape, prefix)?;
        for layer in &self.decoder {
            let h = self.norm(tape, layer.ln_self, y)?;
            let (h, w_self) = self.attend(tape, layer.self_attn, h, h, true, capture)?;
            y = tape.add(y, h)?;

            let h = self.norm(tape, layer.ln_cross, y)?;
            let (h, w_cross) =
                self.attend(tape, layer.cross_attn, h, enc.token_states, false, capture)?;
            y = tape.add(y, h)?;

            let mut w_sent = None;
            if let Some(sent) = layer.sentence {
                let h = self.norm(tape, sent.ln, y)?;
                let (h, w) = self.attend(tape, sent.attn, h, enc.bank, false, capture)?;
                y = tape.add(y, h)?;
                w_sent = Some(w);
            }

            let h = self.norm(tape, layer.ln_ffn, y)?;
            let h = self.feed_forward(tape, layer.ffn, h)?;
            y = tape.add(y, h)?;

            if let Some(t) = trace.as_deref_mut() {
                t.self_attn.push(w_self);
                t.cross_attn.push(w_cross);
                t.sentence_attn.extend(w_sent);
            }
        }
        let y = self.norm(tape, self.dec_norm, y)?;
        let table = tape.param(&self.params, self.embed);
        tape.matmul_nt(y, table)
    }

    /// Logits for the token following `prefix`.
    pub fn decode_step(&self, prefix: &[usize], doc: &FramedDocument) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, doc)?;
        let logits = self.decode_logits(&mut tape, prefix, &enc, None)?;
        let v = tape.value(logits);
        let (rows, _) = v.dims2();
        Ok(v.row(rows - 1).to_vec())
    }

    /// Splits a framed target `[start, y₁ … yₙ, </s>]` into decoder input
    /// and the positions/labels that are scored.
    fn teacher_forcing(target: &[usize]) -> Result<(&[usize], Vec<usize>, Vec<usize>)> {
        if target.len() < 2 || target[0] != START_ID {
            return Err(Error::Argument(
                "target must be framed as decode-start … sentence-end".into(),
            ));
        }
        let input = &target[..target.len() - 1];
        let (positions, labels) = target[1..]
            .iter()
            .enumerate()
            .filter(|(_, &t)| t != PAD_ID)
            .map(|(i, &t)| (i, t))
            .unzip();
        Ok((input, positions, labels))
    }

    /// Teacher-forced mean token cross-entropy over non-pad positions.
    pub fn summarization_loss(&self, tape: &mut Tape, doc: &FramedDocument, target: &[usize]) -> Result<Var> {
        let target = &target[..target.len().min(self.config.max_len + 1)];
        let (input, positions, labels) = Self::teacher_forcing(target)?;
        if labels.is_empty() {
            return Err(Error::Argument("target has no scored positions".into()));
        }
        let enc = self.encode(tape, doc)?;
        let logits = self.decode_logits(tape, input, &enc, None)?;
        let logits = if positions.len() == input.len() {
            logits
        } else {
            tape.gather_rows(logits, &positions)?
        };
        tape.cross_entropy(logits, &labels)
    }

    /// Teacher-forced argmax accuracy as `(correct, scored)`.
    pub fn token_accuracy(&self, doc: &FramedDocument, target: &[usize]) -> Result<(usize, usize)> {
        let target = &target[..target.len().min(self.config.max_len + 1)];
        let (input, positions, labels) = Self::teacher_forcing(target)?;
        let mut tape = Tape::new();
        let enc = self.encode(&mut tape, doc)?;
        let logits = self.decode_logits(&mut tape, input, &enc, None)?;
        let v = tape.value(logits);
        let correct = positions
            .iter()
            .zip(&labels)
            .filter(|(&p, &l)| argmax(v.row(p)) == l)
            .count();
        Ok((correct, labels.len()))
    }

    pub fn generate(&self, doc: &FramedDocument, mode: DecodeMode, max_new_tokens: usize) -> Result<Vec<usize>> {
        super::generate::generate(self, doc, mode, max_new_tokens)
    }

    pub(crate) fn eos_id(&self) -> usize {
        EOS_ID
    }
}

fn is_pretrained_name(name: &str) -> bool {
    name == "embed"
        || name.starts_with("enc.")
        || name.contains(".sent_attn.")
        || name.contains(".ln_sent.")
}

/// First index of the maximum; lower ids win ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}
