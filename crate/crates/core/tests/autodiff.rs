use proptest::prelude::*;

use currsum::autodiff::{check_gradients, ParamStore, Tape, Tensor};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

/// Softmax computed with a compensated sum, as a reference.
fn softmax_oracle(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &e in &exps {
        let y = e - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    exps.iter().map(|e| e / sum).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matmul_gradients_match_finite_differences(a in matrix(3, 4), b in matrix(4, 2)) {
        let mut store = ParamStore::new();
        let pa = store.add("a", a);
        let pb = store.add("b", b);
        let report = check_gradients(&mut store, |tape: &mut Tape, s| {
            let a = tape.param(s, pa);
            let b = tape.param(s, pb);
            let y = tape.matmul(a, b)?;
            let y = tape.mul(y, y)?;
            Ok(tape.sum(y))
        }, 1e-5, 1e-6).unwrap();
        prop_assert!(report.passed(), "{:?}", report.worst);
    }

    #[test]
    fn cross_entropy_gradients_match_finite_differences(
        logits in matrix(4, 5),
        targets in prop::collection::vec(0usize..5, 4),
    ) {
        let mut store = ParamStore::new();
        let p = store.add("logits", logits);
        let report = check_gradients(&mut store, |tape: &mut Tape, s| {
            let x = tape.param(s, p);
            tape.cross_entropy(x, &targets)
        }, 1e-5, 1e-6).unwrap();
        prop_assert!(report.passed(), "{:?}", report.worst);
    }

    #[test]
    fn softmax_matches_reference(x in matrix(3, 7), shift in -50.0f64..50.0) {
        let shifted = Tensor::matrix(3, 7, x.data().iter().map(|v| v * 10.0 + shift).collect()).unwrap();
        let mut tape = Tape::new();
        let v = tape.constant(shifted.clone());
        let s = tape.softmax(v, 1).unwrap();
        for r in 0..3 {
            let want = softmax_oracle(shifted.row(r));
            let got = tape.value(s).row(r);
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() <= 1e-15 + 1e-13 * w.abs());
            }
            let total: f64 = got.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn layer_norm_and_gelu_gradients(x in matrix(2, 6)) {
        let mut store = ParamStore::new();
        let px = store.add("x", x);
        let g = store.add("g", Tensor::vector(vec![1.0, 0.5, -1.0, 2.0, 1.5, 0.3]).unwrap());
        let b = store.add("b", Tensor::vector(vec![0.1; 6]).unwrap());
        let report = check_gradients(&mut store, |tape: &mut Tape, s| {
            let x = tape.param(s, px);
            let g = tape.param(s, g);
            let b = tape.param(s, b);
            let y = tape.layer_norm(x, g, b, 1e-5)?;
            let y = tape.gelu(y);
            let w = tape.constant(Tensor::matrix(2, 6, (0..12).map(|i| i as f64 * 0.1 - 0.5).collect())?);
            let y = tape.mul(y, w)?;
            Ok(tape.sum(y))
        }, 1e-5, 1e-5).unwrap();
        prop_assert!(report.passed(), "{:?}", report.worst);
    }
}

#[test]
fn shared_subexpressions_accumulate() {
    // f(x) = x·x + x + x·x, evaluated through a diamond-shaped graph.
    let mut store = ParamStore::new();
    let p = store.add("x", Tensor::vector(vec![1.5, -2.0]).unwrap());
    let mut tape = Tape::new();
    let x = tape.param(&store, p);
    let again = tape.param(&store, p);
    assert_eq!(x, again);
    let sq = tape.mul(x, x).unwrap();
    let a = tape.add(sq, x).unwrap();
    let b = tape.add(a, sq).unwrap();
    let loss = tape.sum(b);
    let grads = tape.backward(loss).unwrap();
    assert_eq!(grads.param(p).unwrap(), &[4.0 * 1.5 + 1.0, 4.0 * -2.0 + 1.0]);
}

#[test]
fn gradients_accumulate_until_zeroed() {
    let mut store = ParamStore::new();
    let p = store.add("x", Tensor::vector(vec![2.0]).unwrap());
    for _ in 0..2 {
        let mut tape = Tape::new();
        let x = tape.param(&store, p);
        let y = tape.mul(x, x).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss).unwrap().accumulate_into(&mut store);
    }
    assert_eq!(store.get(p).grad.as_deref(), Some(&[8.0][..]));
    store.zero_grad();
    assert!(store.get(p).grad.is_none());
}
