use std::f64::consts::E;

use proptest::prelude::*;

use currsum::curriculum::{lambert_w0, CurriculumState, TauPolicy};
use currsum::Error;

fn state(lambda: f64, tau: f64) -> CurriculumState {
    CurriculumState::new(lambda, TauPolicy::Static(tau)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn lambert_inverts_w_exp_w(w in -1.0f64..12.0) {
        let z = w * w.exp();
        let got = lambert_w0(z).unwrap();
        prop_assert!((got * got.exp() - z).abs() <= 1e-12 * z.abs().max(1.0));
        prop_assert!(got >= -1.0);
    }

    #[test]
    fn lambert_is_increasing(a in -0.36f64..1e4, b in -0.36f64..1e4) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(lambert_w0(lo).unwrap() <= lambert_w0(hi).unwrap());
    }

    #[test]
    fn confidence_is_bounded_and_monotone(
        lambda in 0.01f64..10.0,
        tau in -5.0f64..5.0,
        a in -20.0f64..40.0,
        b in -20.0f64..40.0,
    ) {
        let c = state(lambda, tau);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (sl, sh) = (c.sigma_star(lo).unwrap(), c.sigma_star(hi).unwrap());
        prop_assert!(sl >= sh);
        for s in [sl, sh] {
            prop_assert!(s > 0.0 && s <= E);
        }
    }

    #[test]
    fn closed_form_minimizes_the_objective(
        lambda in 0.05f64..5.0,
        loss in -0.7f64..20.0,
        factor in 0.5f64..2.0,
    ) {
        // Below −2λ/e the objective is unbounded and σ is clamped instead.
        prop_assume!(loss / lambda >= -2.0 / E);
        let c = state(lambda, 0.0);
        let sw = c.superloss(loss).unwrap();
        let other = c.objective(loss, sw.sigma * factor).unwrap();
        prop_assert!(sw.value <= other + 1e-12);
    }
}

#[test]
fn lambert_reference_values() {
    // Values from an arbitrary-precision evaluation.
    let cases = [
        (1.0, 0.567_143_290_409_783_8),
        (0.5, 0.351_733_711_249_195_8),
        (-0.2, -0.259_171_101_819_073_7),
        (10.0, 1.745_528_002_740_699_4),
        (1e6, 11.383_358_086_140_053),
    ];
    for (z, w) in cases {
        let got = lambert_w0(z).unwrap();
        assert!((got - w).abs() <= 1e-14 * w.abs().max(1.0), "W({z}) = {got}, want {w}");
    }
    assert!(matches!(lambert_w0(-0.5), Err(Error::Domain(_))));
}

#[test]
fn confidence_at_tau_is_one() {
    for (lambda, tau) in [(1.0, 0.0), (0.3, 2.5), (7.0, -1.0)] {
        let c = state(lambda, tau);
        assert_eq!(c.sigma_star(tau).unwrap(), 1.0);
        assert_eq!(c.superloss(tau).unwrap().value, 0.0);
    }
}

#[test]
fn mixed_batch_weight_ratio() {
    // ℓ = τ − λ sits in the clamp region (β = −1 < −2/e), so its weight is e.
    let (lambda, tau) = (1.0, 2.0);
    let c = state(lambda, tau);
    let low = c.sigma_star(tau - lambda).unwrap();
    let high = c.sigma_star(tau + lambda).unwrap();
    assert_eq!(low, E);
    assert!((high - 0.703_467_422_498_391_7).abs() < 1e-12);
    assert!((low / high - 3.864_118_993_321_628).abs() < 1e-9);
}

#[test]
fn tau_policies() {
    let mut ema = CurriculumState::new(1.0, TauPolicy::Ema { momentum: 0.5 }).unwrap();
    assert!(ema.tau().is_none());
    assert!(ema.sigma_star(1.0).is_err());
    ema.update_tau(&[2.0, 4.0]).unwrap();
    assert_eq!(ema.tau(), Some(3.0));
    ema.update_tau(&[1.0]).unwrap();
    assert_eq!(ema.tau(), Some(2.0));

    let mut mean = CurriculumState::new(1.0, TauPolicy::BatchMean).unwrap();
    mean.update_tau(&[1.0, 2.0]).unwrap();
    mean.update_tau(&[5.0]).unwrap();
    assert_eq!(mean.tau(), Some(5.0));

    let mut fixed = state(1.0, 0.25);
    fixed.update_tau(&[9.0]).unwrap();
    assert_eq!(fixed.tau(), Some(0.25));
    assert!(matches!(fixed.update_tau(&[f64::NAN]), Err(Error::NonFinite(_))));
}
