use proptest::prelude::*;

use currsum::textmetrics::{
    evaluate_rouge, lcs_len, ngram_overlap, relative_importance, rouge_l, rouge_n, tokenize,
    TokenSeq,
};

fn seq(max_len: usize) -> impl Strategy<Value = TokenSeq> {
    prop::collection::vec(0u8..5, 0..=max_len)
        .prop_map(|v| TokenSeq(v.into_iter().map(|t| format!("t{t}")).collect()))
}

/// Textbook recursion with memoization.
fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    fn go(a: &[String], b: &[String], memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        if let Some(v) = memo[a.len()][b.len()] {
            return v;
        }
        let v = if a[0] == b[0] {
            1 + go(&a[1..], &b[1..], memo)
        } else {
            go(&a[1..], b, memo).max(go(a, &b[1..], memo))
        };
        memo[a.len()][b.len()] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, &mut memo)
}

proptest! {
    #[test]
    fn lcs_agrees_with_recursion(a in seq(12), b in seq(12)) {
        prop_assert_eq!(lcs_len(&a.0, &b.0), lcs_oracle(&a.0, &b.0));
    }

    #[test]
    fn lcs_is_symmetric_and_bounded(a in seq(15), b in seq(15)) {
        let l = lcs_len(&a.0, &b.0);
        prop_assert_eq!(l, lcs_len(&b.0, &a.0));
        prop_assert!(l <= a.len().min(b.len()));
    }

    #[test]
    fn overlap_is_symmetric(a in seq(12), b in seq(12), n in 1usize..4) {
        let (ab, _, _) = ngram_overlap(&a, &b, n);
        let (ba, _, _) = ngram_overlap(&b, &a, n);
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn scores_lie_in_unit_interval(a in seq(12), b in seq(12)) {
        for s in [rouge_n(&a, &b, 1).unwrap(), rouge_n(&a, &b, 2).unwrap(), rouge_l(&a, &b)] {
            for v in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn self_similarity_is_one(a in seq(12)) {
        prop_assume!(a.len() >= 2);
        prop_assert_eq!(rouge_l(&a, &a).f1, 1.0);
        prop_assert_eq!(rouge_n(&a, &a, 2).unwrap().f1, 1.0);
    }

    #[test]
    fn labels_are_a_distribution(
        sentences in prop::collection::vec(seq(10), 1..8),
        summary in seq(10),
    ) {
        let l = relative_importance(&sentences, &summary).unwrap();
        prop_assert_eq!(l.len(), sentences.len());
        prop_assert!(l.scores.iter().all(|&s| s >= 0.0));
        prop_assert!((l.scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn labels_are_permutation_equivariant(
        sentences in prop::collection::vec(seq(10), 2..7),
        summary in seq(10),
        rot in 0usize..7,
    ) {
        let n = sentences.len();
        let rot = rot % n;
        let mut rotated = sentences.clone();
        rotated.rotate_left(rot);
        let a = relative_importance(&sentences, &summary).unwrap();
        let b = relative_importance(&rotated, &summary).unwrap();
        for i in 0..n {
            prop_assert!((a.scores[(i + rot) % n] - b.scores[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn hand_computed_rouge() {
    let c = tokenize("the cat sat on the mat");
    let r = tokenize("the cat lay on the mat");
    // bigrams: 3 of 5 shared (the cat, on the, the mat).
    let r2 = rouge_n(&c, &r, 2).unwrap();
    assert!((r2.f1 - 0.6).abs() < 1e-12);
    // LCS: the cat on the mat.
    assert!((rouge_l(&c, &r).f1 - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn identical_corpora_score_one() {
    let refs = vec![tokenize("a b c ."), tokenize("d e f g")];
    let s = evaluate_rouge(&refs, &refs).unwrap();
    assert_eq!((s.rouge1, s.rouge2, s.rouge_l), (1.0, 1.0, 1.0));
}
