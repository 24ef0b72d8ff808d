//! Composite predictor: linear asymptotes outside `[ll, ul]`, asymptotic
//! extension plus network times blending polynomial inside.
//!
//! ```text
//! f(x)  = A(x) + N(z) Z(x)
//! f'(x) = A'(x) + N'(z) Z(x) / std + N(z) Z'(x),    z = (x - mean) / std
//! ```
//!
//! The network sees normalized inputs; `A` and `Z` work in original units.
//! The trainable vector is the network parameters, followed by
//! `(ls, li, us, ui)` when the asymptotes are trainable.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{AsymptoticParams, ZeroBlend};
use crate::error::{Error, Result};
use crate::neural::{DualEval, Mlp, Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Treatment {
    /// Plain network everywhere.
    None,
    /// Asymptote coefficients optimized together with the network.
    Trainable,
    /// Asymptote coefficients frozen after the least-squares fit.
    Fixed,
}

impl Treatment {
    pub const ALL: [Treatment; 3] = [Treatment::None, Treatment::Trainable, Treatment::Fixed];

    pub fn name(self) -> &'static str {
        match self {
            Treatment::None => "none",
            Treatment::Trainable => "trainable",
            Treatment::Fixed => "fixed",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Treatment::None => 0,
            Treatment::Trainable => 1,
            Treatment::Fixed => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.tag() == tag)
    }

    pub fn uses_asymptotics(self) -> bool {
        self != Treatment::None
    }
}

impl std::fmt::Display for Treatment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Treatment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Treatment::None),
            "trainable" => Ok(Treatment::Trainable),
            "fixed" => Ok(Treatment::Fixed),
            _ => Err(Error::Config(format!(
                "unknown treatment `{s}` (expected none, trainable or fixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && std.is_finite() && std > 0.0) {
            return Err(Error::InvalidData(format!(
                "normalization needs finite mean and std > 0, got mean={mean}, std={std}"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn identity() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }

    /// Sample mean and (n - 1) standard deviation of the inputs.
    pub fn from_inputs(xs: impl IntoIterator<Item = f64> + Clone) -> Result<Self> {
        let (mut n, mut sum) = (0usize, 0.0);
        for x in xs.clone() {
            n += 1;
            sum += x;
        }
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "normalization needs at least 2 inputs, got {n}"
            )));
        }
        let mean = sum / n as f64;
        let ss: f64 = xs.into_iter().map(|x| (x - mean) * (x - mean)).sum();
        Self::new(mean, (ss / (n - 1) as f64).sqrt())
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Lower,
    Interior,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeModel {
    net: Mlp,
    asym: Option<AsymptoticParams>,
    blend: Option<ZeroBlend>,
    treatment: Treatment,
    norm: Normalization,
}

/// Forward state of one composite evaluation, reused across samples.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    net_eval: DualEval,
    scratch: Scratch,
    x: f64,
    interior: bool,
    blend: f64,
    blend_dx: f64,
    pub value: f64,
    pub dvalue_dx: f64,
}

impl CompositeModel {
    /// `asym` is required unless `treatment` is [`Treatment::None`], where it
    /// is ignored. `zscale` overrides the blending scale `1/(ll*ul)`.
    pub fn new(
        net: Mlp,
        treatment: Treatment,
        asym: Option<AsymptoticParams>,
        zscale: Option<f64>,
        norm: Normalization,
    ) -> Result<Self> {
        let (asym, blend) = if treatment.uses_asymptotics() {
            let p =
                asym.ok_or_else(|| Error::Config(format!("treatment `{treatment}` needs asymptotic parameters")))?;
            p.blend_coefficients()?;
            (Some(p), Some(ZeroBlend::resolve(&p, zscale)?))
        } else {
            (None, None)
        };
        Ok(Self {
            net,
            asym,
            blend,
            treatment,
            norm,
        })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn asymptotics(&self) -> Option<&AsymptoticParams> {
        self.asym.as_ref()
    }

    pub fn blend(&self) -> Option<&ZeroBlend> {
        self.blend.as_ref()
    }

    pub fn treatment(&self) -> Treatment {
        self.treatment
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    pub fn region(&self, x: f64) -> Region {
        match &self.asym {
            Some(p) if x <= p.ll => Region::Lower,
            Some(p) if x >= p.ul => Region::Upper,
            _ => Region::Interior,
        }
    }

    pub fn n_trainable(&self) -> usize {
        self.net.n_params() + if self.treatment == Treatment::Trainable { 4 } else { 0 }
    }

    pub fn trainable_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_trainable());
        v.extend_from_slice(self.net.params());
        if self.treatment == Treatment::Trainable {
            v.extend_from_slice(&self.asym.expect("trainable has asymptotics").coefficients());
        }
        v
    }

    pub fn set_trainable_vector(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_trainable() {
            return Err(Error::LengthMismatch {
                expected: self.n_trainable(),
                got: v.len(),
            });
        }
        let k = self.net.n_params();
        self.net.set_params(&v[..k])?;
        if self.treatment == Treatment::Trainable {
            let p = self.asym.as_mut().expect("trainable has asymptotics");
            *p = p.with_coefficients([v[k], v[k + 1], v[k + 2], v[k + 3]]);
        }
        Ok(())
    }

    /// Value and input derivative at `x`.
    pub fn predict(&self, x: f64) -> Result<(f64, f64)> {
        let mut ws = Workspace::default();
        self.forward(x, &mut ws)?;
        Ok((ws.value, ws.dvalue_dx))
    }

    /// Value, derivative, and the gradient of `wv * value + wd * dvalue_dx`
    /// over the trainable vector.
    pub fn predict_with_param_grads(&self, x: f64, wv: f64, wd: f64) -> Result<(f64, f64, Vec<f64>)> {
        let mut ws = Workspace::default();
        self.forward(x, &mut ws)?;
        let mut grad = vec![0.0; self.n_trainable()];
        self.backward_acc(&mut ws, wv, wd, &mut grad)?;
        Ok((ws.value, ws.dvalue_dx, grad))
    }

    /// Forward pass into `ws`; the network is skipped outside the window.
    pub fn forward(&self, x: f64, ws: &mut Workspace) -> Result<()> {
        ws.x = x;
        match (&self.asym, &self.blend) {
            (Some(p), Some(zb)) => {
                let (a, da) = (p.eval(x), p.eval_dx(x));
                if x <= p.ll || x >= p.ul {
                    ws.interior = false;
                    ws.value = a;
                    ws.dvalue_dx = da;
                } else {
                    ws.interior = true;
                    self.net.forward_dual_into(self.norm.apply(x), &mut ws.net_eval)?;
                    ws.blend = zb.eval(x);
                    ws.blend_dx = zb.eval_dx(x);
                    let (n, dn) = (ws.net_eval.value, ws.net_eval.dvalue_dx / self.norm.std);
                    ws.value = a + n * ws.blend;
                    ws.dvalue_dx = da + dn * ws.blend + n * ws.blend_dx;
                }
            }
            _ => {
                ws.interior = true;
                self.net.forward_dual_into(self.norm.apply(x), &mut ws.net_eval)?;
                ws.value = ws.net_eval.value;
                ws.dvalue_dx = ws.net_eval.dvalue_dx / self.norm.std;
            }
        }
        Ok(())
    }

    /// Adds the gradient of `wv * value + wd * dvalue_dx` at the point last
    /// passed to [`forward`](Self::forward) into `grad`.
    pub fn backward_acc(&self, ws: &mut Workspace, wv: f64, wd: f64, grad: &mut [f64]) -> Result<()> {
        if grad.len() != self.n_trainable() {
            return Err(Error::LengthMismatch {
                expected: self.n_trainable(),
                got: grad.len(),
            });
        }
        let k = self.net.n_params();
        let inv_std = 1.0 / self.norm.std;
        match &self.asym {
            Some(p) => {
                if ws.interior {
                    let seed_value = wv * ws.blend + wd * ws.blend_dx;
                    let seed_dvalue = wd * ws.blend * inv_std;
                    self.net.backward_dual_acc(
                        &ws.net_eval,
                        seed_value,
                        seed_dvalue,
                        &mut grad[..k],
                        &mut ws.scratch,
                    )?;
                }
                if self.treatment == Treatment::Trainable {
                    let dv = p.eval_dparams(ws.x);
                    let dd = p.eval_dx_dparams(ws.x);
                    for i in 0..4 {
                        grad[k + i] += wv * dv[i] + wd * dd[i];
                    }
                }
            }
            None => {
                self.net
                    .backward_dual_acc(&ws.net_eval, wv, wd * inv_std, &mut grad[..k], &mut ws.scratch)?;
            }
        }
        Ok(())
    }
}
