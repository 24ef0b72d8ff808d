mod common;

use asymnet::exec::{map_chunks, CHUNK_LEN};
use asymnet::io::{decode_model, encode_model};
use asymnet::problems::{Market, OptionKind};
use asymnet::training::{loss_and_gradient, train};
use asymnet::{
    fit_asymptotes, AsymptoticParams, CompositeModel, DualSample, Execution, LossKind, Mlp, Normalization, TrainConfig,
    Treatment, ZeroBlend,
};
use common::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = AsymptoticParams> {
    (
        -50.0..50.0f64,
        -100.0..100.0f64,
        -100.0..100.0f64,
        0.1..100.0f64,
        -100.0..100.0f64,
        -100.0..100.0f64,
    )
        .prop_map(|(ll, li, ls, w, ui, us)| AsymptoticParams::new(ll, li, ls, ll + w, ui, us).unwrap())
}

fn market() -> impl Strategy<Value = Market> {
    (1.0..30.0f64, -0.02..0.1f64, 0.05..0.8f64, 0.05..3.0f64).prop_map(|(strike, rate, sigma, tau)| Market {
        kind: OptionKind::Call,
        strike,
        rate,
        sigma,
        t: 0.0,
        maturity: tau,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pasting_is_c1(p in params()) {
        let scale = 1f64.max(p.li.abs()).max(p.ui.abs()).max(p.ls.abs() * p.width()).max(p.us.abs() * p.width());
        prop_assert!((p.eval(p.ll) - p.li).abs() <= 1e-12 * scale);
        prop_assert!((p.eval_dx(p.ll) - p.ls).abs() <= 1e-10 * p.ls.abs().max(1.0));
        // approaching ul from inside
        let below = p.ul - 1e-9 * p.width();
        prop_assert!((p.eval(below) - p.ui).abs() <= 1e-7 * scale);
        prop_assert!((p.eval(p.ul) - p.ui).abs() <= 1e-12 * scale);
        prop_assert_eq!(p.eval_dx(p.ul), p.us);
    }

    #[test]
    fn linear_outside_window(p in params(), d in 0.0..30.0f64) {
        let lo = p.ll - d;
        let hi = p.ul + d;
        let tol = 1e-12 * (1.0 + p.li.abs() + p.ui.abs() + (p.ls.abs() + p.us.abs()) * d);
        prop_assert!((p.eval(lo) - (p.li + p.ls * (lo - p.ll))).abs() <= tol);
        prop_assert!((p.eval(hi) - (p.ui + p.us * (hi - p.ul))).abs() <= tol);
        prop_assert_eq!(p.eval_dx(lo), p.ls);
    }

    #[test]
    fn blend_vanishes_at_levels(p in params(), s in -3.0..3.0f64) {
        let zb = ZeroBlend::resolve(&p, Some(s)).unwrap();
        prop_assert_eq!(zb.eval(p.ll), 0.0);
        prop_assert_eq!(zb.eval(p.ul), 0.0);
        prop_assert_eq!(zb.eval_dx(p.ll), 0.0);
        prop_assert_eq!(zb.eval_dx(p.ul), 0.0);
    }

    #[test]
    fn blend_derivative_matches_difference(p in params(), u in 0.05..0.95f64) {
        let zb = ZeroBlend::resolve(&p, Some(1.0)).unwrap();
        let x = p.ll + u * p.width();
        let n = central_diff(|x| zb.eval(x), x, 1e-6 * p.width());
        prop_assert!(close(zb.eval_dx(x), n, 1e-6, 1e-6 * p.width().powi(3)));
    }

    #[test]
    fn fit_recovers_exact_lines(p in params()) {
        let data: Vec<DualSample> = (0..40)
            .map(|i| {
                let x = p.ll - 5.0 + 0.1 * i as f64;
                let x = if i >= 20 { x - 2.0 + p.width() + 5.0 } else { x };
                DualSample::value_only(x, p.eval(x))
            })
            .filter(|s| s.x <= p.ll || s.x >= p.ul)
            .collect();
        if let Ok(f) = fit_asymptotes(&data, p.ll, p.ul, false) {
            let tol = 1e-8 * (1.0 + p.li.abs() + p.ui.abs() + p.ls.abs() + p.us.abs());
            prop_assert!((f.ls - p.ls).abs() <= tol && (f.us - p.us).abs() <= tol);
            prop_assert!((f.li - p.li).abs() <= tol && (f.ui - p.ui).abs() <= tol);
        }
    }

    #[test]
    fn put_call_parity(m in market(), s in 0.1..50.0f64) {
        let (c, _) = m.price_delta(s).unwrap();
        let (p, _) = Market { kind: OptionKind::Put, ..m }.price_delta(s).unwrap();
        prop_assert!((c - p - (s - m.strike * m.discount())).abs() <= 1e-10 * s.max(1.0));
    }

    #[test]
    fn delta_matches_difference(m in market(), s in 0.5..40.0f64) {
        let (_, delta) = m.price_delta(s).unwrap();
        let n = central_diff(|s| m.price_delta(s).unwrap().0, s, 1e-5 * s);
        prop_assert!(close(delta, n, 1e-6, 1e-9), "{} vs {}", delta, n);
    }

    #[test]
    fn model_file_round_trips(seed in any::<u64>(), tag in 0u8..3) {
        let m = random_model(&mut rng(seed), Treatment::from_tag(tag).unwrap());
        let back = decode_model(&encode_model(&m)).unwrap();
        prop_assert_eq!(back.trainable_vector(), m.trainable_vector());
        for x in [-3.0, 0.1, 4.0] {
            prop_assert_eq!(back.predict(x).unwrap(), m.predict(x).unwrap());
        }
    }

    #[test]
    fn trainable_vector_round_trips(seed in any::<u64>()) {
        let mut m = random_model(&mut rng(seed), Treatment::Trainable);
        let v = m.trainable_vector();
        m.set_trainable_vector(&v).unwrap();
        prop_assert_eq!(m.trainable_vector(), v);
    }

    #[test]
    fn chunked_reduction_is_mode_independent(xs in proptest::collection::vec(-1e6..1e6f64, 0..2000)) {
        let sum = |e| map_chunks(e, &xs, CHUNK_LEN, |_, c| c.iter().sum::<f64>()).into_iter().sum::<f64>();
        prop_assert_eq!(sum(Execution::Sequential).to_bits(), sum(Execution::Parallel).to_bits());
    }
}

#[test]
fn loss_and_gradient_bit_identical_across_modes() {
    let mut r = rng(5);
    for t in Treatment::ALL {
        let m = random_model(&mut r, t);
        let data = random_dataset(&mut r, 3 * CHUNK_LEN + 17, -4.0, 5.0);
        let (ls, gs) = loss_and_gradient(&m, &data, LossKind::Dml, 0.7, Execution::Sequential).unwrap();
        let (lp, gp) = loss_and_gradient(&m, &data, LossKind::Dml, 0.7, Execution::Parallel).unwrap();
        assert_eq!(ls.to_bits(), lp.to_bits());
        assert!(gs.iter().zip(&gp).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

// Dyadic inputs keep the normalization exact, so a shifted copy of the data
// must produce bit-identical normalized inputs, predictions and training.
#[test]
fn normalization_is_shift_equivariant() {
    let base: Vec<f64> = [0.5, 1.0, 1.5, 2.0].iter().flat_map(|&v| [v, -v]).collect();
    let shifted: Vec<f64> = base.iter().map(|x| x + 4.0).collect();
    let na = Normalization::from_inputs(base.iter().copied()).unwrap();
    let nb = Normalization::from_inputs(shifted.iter().copied()).unwrap();
    assert_eq!(na.std, nb.std);
    assert_eq!(nb.mean - na.mean, 4.0);
    for (a, b) in base.iter().zip(&shifted) {
        assert_eq!(na.apply(*a), nb.apply(*b));
    }

    let net = Mlp::init(&[1, 6, 4, 1], 9).unwrap();
    let ma = CompositeModel::new(net.clone(), Treatment::None, None, None, na).unwrap();
    let mb = CompositeModel::new(net, Treatment::None, None, None, nb).unwrap();
    for (a, b) in base.iter().zip(&shifted) {
        assert_eq!(ma.predict(*a).unwrap(), mb.predict(*b).unwrap());
    }

    let label = |x: f64| (x * x, 2.0 * x);
    let da: Vec<DualSample> = base
        .iter()
        .map(|&x| DualSample::new(x, label(x).0, label(x).1))
        .collect();
    let db: Vec<DualSample> = base
        .iter()
        .zip(&shifted)
        .map(|(&x, &s)| DualSample::new(s, label(x).0, label(x).1))
        .collect();
    let cfg = TrainConfig {
        loss_kind: LossKind::Dml,
        epochs: 20,
        ..TrainConfig::default()
    };
    let (ta, tra) = train(ma, &da, &cfg).unwrap();
    let (tb, trb) = train(mb, &db, &cfg).unwrap();
    assert_eq!(tra, trb);
    assert_eq!(ta.net().params(), tb.net().params());
}

#[test]
fn fixed_treatment_is_the_asymptote_outside() {
    let mut r = rng(11);
    for _ in 0..20 {
        let m = random_model(&mut r, Treatment::Fixed);
        let p = *m.asymptotics().unwrap();
        for x in [p.ll - 3.0, p.ll, p.ul, p.ul + 0.5, p.ul + 10.0] {
            let (v, d) = m.predict(x).unwrap();
            assert_eq!(v, p.eval(x));
            assert_eq!(d, p.eval_dx(x));
        }
    }
}
