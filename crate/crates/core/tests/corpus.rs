use proptest::prelude::*;

use currsum::corpus::{
    build_vocabulary, cached_labels, corpus_hash, frame, generate_synthetic, label_example,
    parse_jsonl, CacheStatus, Example, SyntheticSpec, Task, Vocabulary, MARKER,
};

#[test]
fn noise_rate_matches_binomial_expectation() {
    let mut spec = SyntheticSpec::new(Task::KeywordExtract, 1000, 10, 17);
    spec.noise_rate = 0.3;
    let c = generate_synthetic(&spec).unwrap();
    let n = c.corrupted.len();
    assert!((255..=345).contains(&n), "{n} corrupted");
}

#[test]
fn generation_is_byte_identical_per_seed() {
    let mut spec = SyntheticSpec::new(Task::KeywordExtract, 200, 20, 5);
    spec.noise_rate = 0.2;
    let a = generate_synthetic(&spec).unwrap();
    let b = generate_synthetic(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(corpus_hash(&a.train), corpus_hash(&b.train));
    spec.seed = 6;
    assert_ne!(generate_synthetic(&spec).unwrap().train, a.train);
}

#[test]
fn marker_sentence_gets_the_top_label() {
    let spec = SyntheticSpec::new(Task::KeywordExtract, 1000, 0, 9);
    let c = generate_synthetic(&spec).unwrap();
    let mut agree = 0;
    for ex in &c.train {
        let labels = label_example(ex).unwrap();
        let marked = ex
            .source_sentences()
            .iter()
            .position(|s| s.0.iter().any(|t| t == MARKER))
            .unwrap();
        if labels.argmax() == marked {
            agree += 1;
        }
    }
    assert!(agree >= 990, "{agree}/1000");
}

#[test]
fn labels_are_cached_by_content() {
    let dir = tempfile::tempdir().unwrap();
    let c = generate_synthetic(&SyntheticSpec::new(Task::Lead1, 30, 0, 2)).unwrap();
    let (first, s1) = cached_labels(&c.train, dir.path()).unwrap();
    let (second, s2) = cached_labels(&c.train, dir.path()).unwrap();
    assert_eq!((s1, s2), (CacheStatus::Miss, CacheStatus::Hit));
    assert_eq!(first, second);
    let mut changed = c.train.clone();
    changed[0].summary.push_str(" w1");
    let (_, s3) = cached_labels(&changed, dir.path()).unwrap();
    assert_eq!(s3, CacheStatus::Miss);
}

#[test]
fn hash_ignores_unrelated_files_and_tracks_bytes() {
    let text = "{\"id\":\"a\",\"source\":\"x y. z.\",\"summary\":\"x y\"}\n";
    let dir = tempfile::tempdir().unwrap();
    let before = corpus_hash(&parse_jsonl(text).unwrap().examples);
    std::fs::write(dir.path().join("unrelated.txt"), "noise").unwrap();
    assert_eq!(before, corpus_hash(&parse_jsonl(text).unwrap().examples));
    let edited = text.replace("x y. z.", "x y. z!");
    assert_ne!(before, corpus_hash(&parse_jsonl(&edited).unwrap().examples));
}

#[test]
fn framing_round_trips_through_the_vocabulary() {
    let ex = Example::new("1", "alpha beta. gamma delta epsilon. zeta.", "beta gamma");
    let vocab = build_vocabulary(std::slice::from_ref(&ex));
    let f = frame(&ex, &vocab, 64).unwrap();
    let words: Vec<Vec<String>> = f.doc.sentences().iter().map(|s| vocab.decode(s)).collect();
    let original: Vec<Vec<String>> = ex.source_sentences().into_iter().map(|s| s.0).collect();
    assert_eq!(words, original);
}

proptest! {
    #[test]
    fn vocabulary_round_trip(words in prop::collection::vec("[a-z]{1,6}", 1..30)) {
        let vocab = Vocabulary::build(words.iter().map(String::as_str));
        let ids = vocab.encode(&words);
        prop_assert_eq!(vocab.decode(&ids), words);
        let back = Vocabulary::from_tokens(vocab.tokens().to_vec()).unwrap();
        prop_assert_eq!(back, vocab);
    }
}
