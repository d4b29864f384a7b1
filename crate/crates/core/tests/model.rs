use proptest::prelude::*;

use currsum::autodiff::Tape;
use currsum::corpus::vocab::{EOS_ID, START_ID};
use currsum::model::{checkpoint, AttentionTrace, DecodeMode, FramedDocument, ModelConfig, Seq2SeqModel};
use currsum::corpus::Vocabulary;

fn config(sentence_attention: bool) -> ModelConfig {
    let mut c = ModelConfig::new(14);
    c.d_model = 16;
    c.n_heads = 2;
    c.enc_layers = 1;
    c.dec_layers = 2;
    c.ffn_dim = 32;
    c.max_len = 32;
    c.sentence_attention = sentence_attention;
    c
}

fn doc() -> FramedDocument {
    FramedDocument::from_sentences(&[vec![5, 6, 7], vec![8, 9], vec![10, 11, 12, 13]]).unwrap()
}

fn vocab() -> Vocabulary {
    Vocabulary::build((0..9).map(|i| ["a", "b", "c", "d", "e", "f", "g", "h", "i"][i]))
}

#[test]
fn attention_rows_are_distributions() {
    let model = Seq2SeqModel::new(config(true), 3).unwrap();
    let mut tape = Tape::new();
    let enc = model.encode(&mut tape, &doc()).unwrap();
    let mut trace = AttentionTrace::default();
    model
        .decode_logits(&mut tape, &[START_ID, 6, 9, 12], &enc, Some(&mut trace))
        .unwrap();
    assert_eq!(trace.self_attn.len(), 2);
    assert_eq!(trace.sentence_attn.len(), 2);
    for layer in trace.self_attn.iter().chain(&trace.cross_attn).chain(&trace.sentence_attn) {
        assert_eq!(layer.len(), 2, "one matrix per head");
        for w in layer {
            for row in w.rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p >= 0.0));
            }
        }
    }
    // Sentence attention spans exactly the three sentence states.
    assert_eq!(trace.sentence_attn[0][0].shape(), &[4, 3]);
    // Self-attention never looks ahead.
    for w in &trace.self_attn[0] {
        for (i, row) in w.rows().iter().enumerate() {
            assert!(row[i + 1..].iter().all(|&p| p == 0.0));
        }
    }
}

#[test]
fn decoder_is_causal() {
    let model = Seq2SeqModel::new(config(true), 4).unwrap();
    let logits = |prefix: &[usize]| {
        let mut tape = Tape::new();
        let enc = model.encode(&mut tape, &doc()).unwrap();
        let l = model.decode_logits(&mut tape, prefix, &enc, None).unwrap();
        tape.value(l).rows()
    };
    let a = logits(&[START_ID, 6, 9, 12]);
    let b = logits(&[START_ID, 6, 13, 5]);
    assert_eq!(a[0], b[0]);
    assert_eq!(a[1], b[1]);
    assert_ne!(a[2], b[2]);
}

#[test]
fn sentence_attention_adds_expected_parameters() {
    let off = Seq2SeqModel::new(config(false), 1).unwrap();
    let on = Seq2SeqModel::new(config(true), 1).unwrap();
    let d = 16;
    let per_layer = 4 * (d * d + d) + 2 * d;
    assert_eq!(on.params().numel() - off.params().numel(), 2 * per_layer);
    // Shared parameters are initialized identically.
    for (_, p) in off.params().iter() {
        let id = on.params().find(&p.name).unwrap();
        assert_eq!(on.params().get(id).value, p.value, "{}", p.name);
    }
}

#[test]
fn initialization_is_seeded() {
    let a = Seq2SeqModel::new(config(true), 7).unwrap();
    let b = Seq2SeqModel::new(config(true), 7).unwrap();
    let c = Seq2SeqModel::new(config(true), 8).unwrap();
    let values = |m: &Seq2SeqModel| {
        m.params()
            .iter()
            .flat_map(|(_, p)| p.value.data().to_vec())
            .map(f64::to_bits)
            .collect::<Vec<_>>()
    };
    assert_eq!(values(&a), values(&b));
    assert_ne!(values(&a), values(&c));
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let mut model = Seq2SeqModel::new(config(true), 5).unwrap();
    model.set_stage1_done(true);
    let vocab = vocab();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save(&model, &vocab, &path).unwrap();
    let (back, back_vocab) = checkpoint::load(&path).unwrap();
    assert_eq!(back_vocab, vocab);
    assert!(back.stage1_done());
    assert_eq!(back.config(), model.config());
    for ((_, a), (_, b)) in model.params().iter().zip(back.params().iter()) {
        assert_eq!(a.name, b.name);
        let bits = |p: &currsum::autodiff::Parameter| {
            p.value.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(a), bits(b));
    }
    let d = doc();
    assert_eq!(
        model.generate(&d, DecodeMode::Beam(3), 10).unwrap(),
        back.generate(&d, DecodeMode::Beam(3), 10).unwrap()
    );
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let model = Seq2SeqModel::new(config(false), 5).unwrap();
    let text = checkpoint::to_string(&model, &vocab());
    let truncated = &text[..text.len() / 2];
    assert!(matches!(
        checkpoint::from_str(truncated),
        Err(currsum::Error::Checkpoint(_))
    ));
    assert!(checkpoint::from_str("hello").is_err());
}

#[test]
fn beam_of_one_is_greedy() {
    for seed in 0..4 {
        let model = Seq2SeqModel::new(config(seed % 2 == 0), seed).unwrap();
        let d = doc();
        assert_eq!(
            model.generate(&d, DecodeMode::Greedy, 12).unwrap(),
            model.generate(&d, DecodeMode::Beam(1), 12).unwrap()
        );
    }
}

#[test]
fn generation_respects_length_limits() {
    let model = Seq2SeqModel::new(config(false), 2).unwrap();
    let d = doc();
    assert!(model.generate(&d, DecodeMode::Greedy, 0).unwrap().is_empty());
    assert!(model.generate(&d, DecodeMode::Greedy, 5).unwrap().len() <= 5);
    assert!(model.generate(&d, DecodeMode::Beam(0), 5).is_err());
    let out = model.generate(&d, DecodeMode::Beam(3), 100).unwrap();
    assert!(out.len() < 32);
    assert!(!out.contains(&EOS_ID));
}

proptest! {
    #[test]
    fn framing_marks_every_sentence_end(
        sentences in prop::collection::vec(prop::collection::vec(5usize..40, 1..6), 1..6)
    ) {
        let d = FramedDocument::from_sentences(&sentences).unwrap();
        prop_assert_eq!(d.sentence_count(), sentences.len());
        for &p in d.eos_positions() {
            prop_assert_eq!(d.token_ids()[p], EOS_ID);
        }
        prop_assert_eq!(d.sentences(), sentences);
    }

    #[test]
    fn truncation_keeps_framing_valid(
        sentences in prop::collection::vec(prop::collection::vec(5usize..40, 1..8), 1..6),
        max_len in 3usize..30,
    ) {
        let d = FramedDocument::from_sentences(&sentences).unwrap().truncated(max_len);
        prop_assert!(d.len() <= max_len);
        prop_assert!(d.sentence_count() >= 1);
        for &p in d.eos_positions() {
            prop_assert_eq!(d.token_ids()[p], EOS_ID);
        }
    }
}
