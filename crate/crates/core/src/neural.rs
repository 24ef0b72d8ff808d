//! Feed-forward network with one input and one output, softplus hidden
//! layers and a linear output layer.
//!
//! The forward pass carries the input tangent alongside the values, giving the
//! network output and its input derivative in one sweep. The reverse pass runs
//! over that doubled computation, so one backward call yields the parameter
//! gradient of any combination `wv * value + wd * dvalue_dx`.
//!
//! Parameters are stored flat, layer by layer: the weight matrix (row-major,
//! `out x in`) followed by the bias vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, uniform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Softplus,
}

impl Activation {
    pub fn tag(self) -> u8 {
        match self {
            Activation::Softplus => 0,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Softplus),
            _ => None,
        }
    }
}

/// `ln(1 + e^u)` without overflow.
#[inline]
pub fn softplus(u: f64) -> f64 {
    u.max(0.0) + (-u.abs()).exp().ln_1p()
}

/// Derivative of [`softplus`], the logistic function.
#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    activation: Activation,
}

/// Output of [`Mlp::forward_dual`] plus the per-node state the reverse pass needs.
#[derive(Debug, Clone, Default)]
pub struct DualEval {
    pub value: f64,
    pub dvalue_dx: f64,
    /// Post-activation values of every node, input layer first.
    acts: Vec<f64>,
    /// Input tangents of every node, post-activation.
    tangents: Vec<f64>,
    /// Pre-activation tangents (only hidden nodes are read back).
    pre_tangents: Vec<f64>,
    /// Logistic of the pre-activation for hidden nodes.
    gates: Vec<f64>,
}

/// Reusable buffers for the reverse pass.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    adj: Vec<f64>,
    dadj: Vec<f64>,
    next_adj: Vec<f64>,
    next_dadj: Vec<f64>,
}

pub fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::InvalidNetwork(format!(
            "need at least input and output layers, got {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidNetwork(format!(
            "layer sizes must be positive, got {sizes:?}"
        )));
    }
    if sizes[0] != 1 || sizes[sizes.len() - 1] != 1 {
        return Err(Error::InvalidNetwork(format!(
            "input and output widths must be 1, got {sizes:?}"
        )));
    }
    Ok(())
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform weights `U(-sqrt(6/(fan_in+fan_out)), +...)`, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        validate_sizes(sizes)?;
        let mut rng = stream_rng(seed, 0);
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| uniform(&mut rng, -bound, bound)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
            activation: Activation::Softplus,
        })
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>, activation: Activation) -> Result<Self> {
        validate_sizes(&sizes)?;
        let expected = param_count(&sizes);
        if params.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            sizes,
            params,
            activation,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::LengthMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    fn n_nodes(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn max_width(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(1)
    }

    pub fn forward_dual(&self, x: f64) -> Result<DualEval> {
        let mut eval = DualEval::default();
        self.forward_dual_into(x, &mut eval)?;
        Ok(eval)
    }

    /// Forward pass reusing the buffers in `eval`.
    pub fn forward_dual_into(&self, x: f64, eval: &mut DualEval) -> Result<()> {
        let n = self.n_nodes();
        for buf in [
            &mut eval.acts,
            &mut eval.tangents,
            &mut eval.pre_tangents,
            &mut eval.gates,
        ] {
            buf.clear();
            buf.resize(n, 0.0);
        }
        eval.acts[0] = x;
        eval.tangents[0] = 1.0;
        eval.pre_tangents[0] = 1.0;

        let last = self.n_layers() - 1;
        let (mut poff, mut in_off) = (0, 0);
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let out_off = in_off + fan_in;
            let weights = &self.params[poff..poff + fan_in * fan_out];
            let biases = &self.params[poff + fan_in * fan_out..poff + fan_in * fan_out + fan_out];
            for i in 0..fan_out {
                let row = &weights[i * fan_in..(i + 1) * fan_in];
                let mut u = biases[i];
                let mut du = 0.0;
                for j in 0..fan_in {
                    u += row[j] * eval.acts[in_off + j];
                    du += row[j] * eval.tangents[in_off + j];
                }
                let k = out_off + i;
                eval.pre_tangents[k] = du;
                if l == last {
                    eval.acts[k] = u;
                    eval.tangents[k] = du;
                } else {
                    let s = logistic(u);
                    eval.gates[k] = s;
                    eval.acts[k] = softplus(u);
                    eval.tangents[k] = s * du;
                }
                if !(eval.acts[k].is_finite() && eval.tangents[k].is_finite()) {
                    return Err(Error::NonFiniteLayer { layer: l + 1 });
                }
            }
            poff += fan_in * fan_out + fan_out;
            in_off = out_off;
        }
        eval.value = eval.acts[n - 1];
        eval.dvalue_dx = eval.tangents[n - 1];
        Ok(())
    }

    /// Gradient of `wv * value + wd * dvalue_dx` over all parameters.
    pub fn backward_dual(&self, eval: &DualEval, wv: f64, wd: f64) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.n_params()];
        self.backward_dual_acc(eval, wv, wd, &mut grad, &mut Scratch::default())?;
        Ok(grad)
    }

    /// Like [`backward_dual`](Self::backward_dual) but adds into `grad`.
    pub fn backward_dual_acc(
        &self,
        eval: &DualEval,
        wv: f64,
        wd: f64,
        grad: &mut [f64],
        scratch: &mut Scratch,
    ) -> Result<()> {
        let n = self.n_nodes();
        if eval.acts.len() != n || eval.tangents.len() != n || eval.gates.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "cached forward state has {} nodes, network has {n}",
                eval.acts.len()
            )));
        }
        if grad.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                expected: self.n_params(),
                got: grad.len(),
            });
        }
        let width = self.max_width();
        for buf in [
            &mut scratch.adj,
            &mut scratch.dadj,
            &mut scratch.next_adj,
            &mut scratch.next_dadj,
        ] {
            buf.clear();
            buf.resize(width, 0.0);
        }
        scratch.adj[0] = wv;
        scratch.dadj[0] = wd;

        let last = self.n_layers() - 1;
        let mut poff = self.n_params();
        let mut out_off = n - 1;
        for l in (0..self.n_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let in_off = out_off - fan_in;
            poff -= fan_in * fan_out + fan_out;
            let w_range = poff..poff + fan_in * fan_out;
            let b_off = poff + fan_in * fan_out;

            scratch.next_adj[..fan_in].fill(0.0);
            scratch.next_dadj[..fan_in].fill(0.0);
            for i in 0..fan_out {
                let k = out_off + i;
                let (ubar, dubar) = if l == last {
                    (scratch.adj[i], scratch.dadj[i])
                } else {
                    // a = sp(u), da = s(u) du, s' = s (1 - s)
                    let s = eval.gates[k];
                    let ds = s * (1.0 - s);
                    (
                        scratch.adj[i] * s + scratch.dadj[i] * eval.pre_tangents[k] * ds,
                        scratch.dadj[i] * s,
                    )
                };
                grad[b_off + i] += ubar;
                let row = w_range.start + i * fan_in;
                for j in 0..fan_in {
                    grad[row + j] += ubar * eval.acts[in_off + j] + dubar * eval.tangents[in_off + j];
                }
                if l > 0 {
                    let weights = &self.params[row..row + fan_in];
                    for j in 0..fan_in {
                        scratch.next_adj[j] += weights[j] * ubar;
                        scratch.next_dadj[j] += weights[j] * dubar;
                    }
                }
            }
            std::mem::swap(&mut scratch.adj, &mut scratch.next_adj);
            std::mem::swap(&mut scratch.dadj, &mut scratch.next_dadj);
            out_off = in_off;
        }
        Ok(())
    }

    /// Plain forward evaluation, used by finite-difference checks.
    pub fn value(&self, x: f64) -> Result<f64> {
        Ok(self.forward_dual(x)?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let a = Mlp::init(&[1, 20, 20, 1], 42).unwrap();
        let b = Mlp::init(&[1, 20, 20, 1], 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Mlp::init(&[1, 20, 20, 1], 43).unwrap());
        assert_eq!(a.n_params(), 481);
    }

    #[test]
    fn init_weights_bounded_and_biases_zero() {
        let net = Mlp::init(&[1, 20, 20, 1], 42).unwrap();
        let mut off = 0;
        for w in net.sizes().windows(2) {
            let nw = w[0] * w[1];
            for &v in &net.params()[off..off + nw] {
                assert!(v > -1.0 && v < 1.0 && v != 0.0);
            }
            assert!(net.params()[off + nw..off + nw + w[1]].iter().all(|&b| b == 0.0));
            off += nw + w[1];
        }
    }

    #[test]
    fn smallest_network() {
        let net = Mlp::init(&[1, 1], 0).unwrap();
        assert_eq!(net.n_params(), 2);
        assert_eq!(net.params()[1], 0.0);
    }

    #[test]
    fn invalid_sizes() {
        assert!(Mlp::init(&[], 0).is_err());
        assert!(Mlp::init(&[1], 0).is_err());
        assert!(Mlp::init(&[1, 0, 1], 0).is_err());
        assert!(Mlp::init(&[2, 3, 1], 0).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut net = Mlp::init(&[1, 20, 20, 1], 1).unwrap();
        net.params_mut().fill(0.0);
        let e = net.forward_dual(3.7).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.dvalue_dx, 0.0);
        assert_eq!(e.acts[1], std::f64::consts::LN_2);
    }

    #[test]
    fn affine_network() {
        let net = Mlp::from_parts(vec![1, 1], vec![2.0, 1.0], Activation::Softplus).unwrap();
        let e = net.forward_dual(3.0).unwrap();
        assert_eq!(e.value, 7.0);
        assert_eq!(e.dvalue_dx, 2.0);
        assert_eq!(net.backward_dual(&e, 1.0, 0.0).unwrap(), vec![3.0, 1.0]);
        assert_eq!(net.backward_dual(&e, 0.0, 0.0).unwrap(), vec![0.0, 0.0]);
        // d(dvalue)/dw = 1, d(dvalue)/db = 0
        assert_eq!(net.backward_dual(&e, 0.0, 1.0).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn softplus_overflow_safe() {
        for u in [1e4, -1e4, 710.0, -745.0, 0.0] {
            let (v, d) = (softplus(u), logistic(u));
            assert!(v.is_finite() && v >= 0.0);
            assert!((0.0..=1.0).contains(&d));
        }
        assert_eq!(softplus(1e4), 1e4);
        assert_eq!(softplus(0.0), std::f64::consts::LN_2);
    }

    #[test]
    fn non_finite_reports_layer() {
        let mut net = Mlp::init(&[1, 3, 1], 1).unwrap();
        net.params_mut()[3] = f64::INFINITY;
        match net.forward_dual(1.0) {
            Err(Error::NonFiniteLayer { layer: 1 }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_cache_rejected() {
        let a = Mlp::init(&[1, 3, 1], 1).unwrap();
        let b = Mlp::init(&[1, 4, 1], 1).unwrap();
        let e = a.forward_dual(0.2).unwrap();
        assert!(b.backward_dual(&e, 1.0, 0.0).is_err());
    }
}
