#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use asymnet::problems::{Market, OptionKind};
use asymnet::{AsymptoticParams, CompositeModel, DualSample, Mlp, Normalization, Treatment};

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// erf by its everywhere-convergent series with positive terms,
/// `2/sqrt(pi) exp(-x^2) sum 2^n x^(2n+1) / (2n+1)!!`.
pub fn erf_series(x: f64) -> f64 {
    if x < 0.0 {
        return -erf_series(-x);
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > sum * 1e-18 {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x2).exp() * sum
}

pub fn norm_cdf_oracle(x: f64) -> f64 {
    0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2))
}

/// Black-Scholes price and delta through the series CDF.
pub fn bs_oracle(m: &Market, s: f64) -> (f64, f64) {
    let tau = m.maturity - m.t;
    let vol = m.sigma * tau.sqrt();
    let d1 = ((s / m.strike).ln() + (m.rate + 0.5 * m.sigma * m.sigma) * tau) / vol;
    let d2 = d1 - vol;
    let df = (-m.rate * tau).exp();
    match m.kind {
        OptionKind::Call => (
            s * norm_cdf_oracle(d1) - m.strike * df * norm_cdf_oracle(d2),
            norm_cdf_oracle(d1),
        ),
        OptionKind::Put => (
            m.strike * df * norm_cdf_oracle(-d2) - s * norm_cdf_oracle(-d1),
            norm_cdf_oracle(d1) - 1.0,
        ),
    }
}

/// Relative error check with an absolute floor.
pub fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    let d = (a - b).abs();
    d <= abs_floor || d <= rel * a.abs().max(b.abs())
}

pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

pub fn random_params(r: &mut impl Rng) -> AsymptoticParams {
    let ll = r.random_range(-50.0..50.0);
    let w = r.random_range(0.1..100.0);
    AsymptoticParams::new(
        ll,
        r.random_range(-100.0..100.0),
        r.random_range(-100.0..100.0),
        ll + w,
        r.random_range(-100.0..100.0),
        r.random_range(-100.0..100.0),
    )
    .unwrap()
}

/// Small random network with perturbed (nonzero) biases.
pub fn random_net(r: &mut impl Rng) -> Mlp {
    let h1 = r.random_range(1..6);
    let h2 = r.random_range(1..6);
    let mut net = Mlp::init(&[1, h1, h2, 1], r.random()).unwrap();
    for p in net.params_mut() {
        *p += r.random_range(-0.5..0.5);
    }
    net
}

/// Composite model with window `[-2, 3]` and moderate coefficients.
pub fn random_model(r: &mut impl Rng, treatment: Treatment) -> CompositeModel {
    let asym = AsymptoticParams::new(
        -2.0,
        r.random_range(-2.0..2.0),
        r.random_range(-2.0..2.0),
        3.0,
        r.random_range(-2.0..2.0),
        r.random_range(-2.0..2.0),
    )
    .unwrap();
    let norm = Normalization::new(r.random_range(-1.0..1.0), r.random_range(0.5..2.0)).unwrap();
    CompositeModel::new(
        random_net(r),
        treatment,
        treatment.uses_asymptotics().then_some(asym),
        None,
        norm,
    )
    .unwrap()
}

pub fn random_dataset(r: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<DualSample> {
    (0..n)
        .map(|_| {
            let x = r.random_range(lo..hi);
            DualSample::new(x, x.sin() + r.random_range(-0.1..0.1), x.cos())
        })
        .collect()
}

pub const GRAD_REL: f64 = 1e-5;
pub const GRAD_ABS: f64 = 1e-9;

pub fn grads_match(analytic: &[f64], numeric: &[f64]) -> Result<(), String> {
    if analytic.len() != numeric.len() {
        return Err(format!("length {} vs {}", analytic.len(), numeric.len()));
    }
    for (i, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        if !close(*a, *n, GRAD_REL, GRAD_ABS) {
            return Err(format!("entry {i}: analytic {a:e} vs finite difference {n:e}"));
        }
    }
    Ok(())
}

fn fd_vector(p: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            let h = fd_step(p[i]);
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Network input derivative against a central difference of the value.
pub fn check_input_derivative(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let net = random_net(&mut r);
    let x = r.random_range(-3.0..3.0);
    let d = net.forward_dual(x).unwrap().dvalue_dx;
    let n = central_diff(|x| net.value(x).unwrap(), x, fd_step(x));
    grads_match(&[d], &[n])
}

/// Parameter gradients of the network value and of its input derivative.
pub fn check_backward(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let net = random_net(&mut r);
    let x = r.random_range(-3.0..3.0);
    let eval = net.forward_dual(x).unwrap();
    let at = |p: &[f64]| {
        let mut n = net.clone();
        n.set_params(p).unwrap();
        n.forward_dual(x).unwrap()
    };
    let gv = net.backward_dual(&eval, 1.0, 0.0).unwrap();
    let gd = net.backward_dual(&eval, 0.0, 1.0).unwrap();
    grads_match(&gv, &fd_vector(net.params(), |p| at(p).value)).map_err(|e| format!("value seed, {e}"))?;
    grads_match(&gd, &fd_vector(net.params(), |p| at(p).dvalue_dx)).map_err(|e| format!("dvalue seed, {e}"))
}

/// Composite trainable-vector gradient of `wv * f + wd * f'` at a point
/// drawn from every region.
pub fn check_predict_grads(seed: u64, treatment: Treatment) -> Result<(), String> {
    let mut r = rng(seed);
    let m = random_model(&mut r, treatment);
    let wv = r.random_range(-2.0..2.0);
    let wd = r.random_range(-2.0..2.0);
    // window is [-2, 3]; keep clear of the edges where the branch changes
    let xs = [
        r.random_range(-5.0..-2.1),
        r.random_range(-1.9..2.9),
        r.random_range(3.1..6.0),
    ];
    for x in xs {
        let (v, d, g) = m.predict_with_param_grads(x, wv, wd).unwrap();
        let (pv, pd) = m.predict(x).unwrap();
        if v != pv || d != pd {
            return Err(format!("predict mismatch at x={x}"));
        }
        let num = fd_vector(&m.trainable_vector(), |p| {
            let mut q = m.clone();
            q.set_trainable_vector(p).unwrap();
            let (v, d) = q.predict(x).unwrap();
            wv * v + wd * d
        });
        grads_match(&g, &num).map_err(|e| format!("x={x}: {e}"))?;
        let dnum = central_diff(|x| m.predict(x).unwrap().0, x, fd_step(x));
        grads_match(&[d], &[dnum]).map_err(|e| format!("input derivative at x={x}: {e}"))?;
    }
    Ok(())
}

/// Assembled loss gradient over a small dataset spanning all regions.
pub fn check_loss_grads(seed: u64, kind: asymnet::LossKind, treatment: Treatment) -> Result<(), String> {
    use asymnet::training::{dml_loss, loss_and_gradient, vml_loss};
    let mut r = rng(seed);
    let m = random_model(&mut r, treatment);
    let data = random_dataset(&mut r, 12, -4.0, 5.0);
    let lambda = r.random_range(0.1..2.0);
    let loss = |q: &CompositeModel| match kind {
        asymnet::LossKind::Vml => vml_loss(q, &data).unwrap(),
        asymnet::LossKind::Dml => dml_loss(q, &data, lambda).unwrap(),
    };
    let (l, g) = loss_and_gradient(&m, &data, kind, lambda, asymnet::Execution::Sequential).unwrap();
    if !close(l, loss(&m), 1e-12, 0.0) {
        return Err(format!("loss {l} differs from direct evaluation {}", loss(&m)));
    }
    let num = fd_vector(&m.trainable_vector(), |p| {
        let mut q = m.clone();
        q.set_trainable_vector(p).unwrap();
        loss(&q)
    });
    grads_match(&g, &num)
}
