//! Ground truths and samplers: the synthetic piecewise function, the
//! Black-Scholes price with its delta, and one-step Monte Carlo payoffs with
//! pathwise derivatives.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{AsymptoticParams, ZeroBlend};
use crate::data::DualSample;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::normal::norm_cdf;
use crate::rng::{standard_normal, stream_rng, uniform};

/// `f(x) = A(x) + x Z(x)` inside the window, `A(x)` outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub asym: AsymptoticParams,
    pub lo: f64,
    pub hi: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            asym: AsymptoticParams {
                ll: -5.0,
                li: 0.0,
                ls: 50.0,
                ul: 5.0,
                ui: 0.0,
                us: 50.0,
            },
            lo: -10.0,
            hi: 10.0,
            n_samples: 50_000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        self.asym.blend_coefficients()?;
        ZeroBlend::literal(&self.asym)?;
        if !(self.lo <= self.asym.ll && self.hi >= self.asym.ul && self.lo < self.hi) {
            return Err(Error::Config(format!(
                "sampling range [{}, {}] must contain the window [{}, {}]",
                self.lo, self.hi, self.asym.ll, self.asym.ul
            )));
        }
        Ok(())
    }

    /// Value and derivative of the synthetic function.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let p = &self.asym;
        let z = ZeroBlend {
            ll: p.ll,
            ul: p.ul,
            scale: 1.0 / (p.ll * p.ul),
        };
        let (a, da) = (p.eval(x), p.eval_dx(x));
        if x <= p.ll || x >= p.ul {
            (a, da)
        } else {
            (a + x * z.eval(x), da + z.eval(x) + x * z.eval_dx(x))
        }
    }

    /// `n_samples` uniform draws on `[lo, hi)` with exact labels.
    pub fn sample(&self, exec: Execution) -> Result<Vec<DualSample>> {
        self.validate()?;
        Ok(map_indexed(exec, self.n_samples, |i| {
            let x = uniform(&mut stream_rng(self.seed, i as u64), self.lo, self.hi);
            let (y, dy) = self.eval(x);
            DualSample::new(x, y, dy)
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    /// `+1` for calls, `-1` for puts.
    pub fn phi(self) -> f64 {
        match self {
            OptionKind::Call => 1.0,
            OptionKind::Put => -1.0,
        }
    }
}

/// Black-Scholes market and contract, without the spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Market {
    pub kind: OptionKind,
    pub strike: f64,
    /// Continuously compounded short rate per year.
    pub rate: f64,
    /// Volatility per square-root year.
    pub sigma: f64,
    /// Intermediate (valuation) time in years.
    pub t: f64,
    /// Maturity in years.
    pub maturity: f64,
}

impl Default for Market {
    fn default() -> Self {
        Self {
            kind: OptionKind::Call,
            strike: 10.0,
            rate: 0.0,
            sigma: 0.1,
            t: 1.0,
            maturity: 2.0,
        }
    }
}

impl Market {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma > 0.0
            && self.maturity > self.t
            && self.t >= 0.0
            && self.strike > 0.0
            && self.rate.is_finite()
            && self.maturity.is_finite();
        if !ok {
            return Err(Error::InvalidMarket(format!(
                "need sigma > 0, maturity > t >= 0, strike > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.maturity - self.t
    }

    pub fn discount(&self) -> f64 {
        (-self.rate * self.tau()).exp()
    }

    /// Price and delta at spot `s`.
    pub fn price_delta(&self, s: f64) -> Result<(f64, f64)> {
        self.validate()?;
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidMarket(format!("spot must be finite and >= 0, got {s}")));
        }
        let phi = self.kind.phi();
        let df = self.discount();
        if s == 0.0 {
            let price = (phi * -self.strike * df).max(0.0);
            let delta = match self.kind {
                OptionKind::Call => 0.0,
                OptionKind::Put => -1.0,
            };
            return Ok((price, delta));
        }
        let vol = self.sigma * self.tau().sqrt();
        let d_plus = ((s / self.strike).ln() + (self.rate + 0.5 * self.sigma * self.sigma) * self.tau()) / vol;
        let d_minus = d_plus - vol;
        let n_plus = norm_cdf(phi * d_plus);
        let price = phi * (n_plus * s - norm_cdf(phi * d_minus) * self.strike * df);
        Ok((price, phi * n_plus))
    }

    /// One exact lognormal step from `t` to maturity: discounted payoff and
    /// its pathwise derivative with respect to the spot at `t`.
    pub fn payoff_sample(&self, s_t: f64, z: f64) -> DualSample {
        let tau = self.tau();
        let growth = ((self.rate - 0.5 * self.sigma * self.sigma) * tau + self.sigma * tau.sqrt() * z).exp();
        let s_end = s_t * growth;
        let df = self.discount();
        let phi = self.kind.phi();
        // kink at s_end == strike has derivative 0
        let in_money = phi * (s_end - self.strike) > 0.0;
        let y = df * (phi * (s_end - self.strike)).max(0.0);
        let dy = if in_money { df * phi * growth } else { 0.0 };
        DualSample::new(s_t, y, dy)
    }

    /// `n` spots uniform on `[lo, hi)` labelled with closed-form price and delta.
    pub fn function_sample(&self, lo: f64, hi: f64, n: usize, seed: u64, exec: Execution) -> Result<Vec<DualSample>> {
        self.validate()?;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::Config(format!(
                "spot range [{lo}, {hi}] must satisfy 0 <= lo < hi"
            )));
        }
        map_indexed(exec, n, |i| {
            let s = uniform(&mut stream_rng(seed, i as u64), lo, hi);
            self.price_delta(s).map(|(p, d)| DualSample::new(s, p, d))
        })
        .into_iter()
        .collect()
    }
}

/// How spots at the intermediate time are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpotDistribution {
    /// Exact lognormal from `s0` at time 0 to `t`.
    Lognormal {
        s0: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub n_paths: usize,
    pub spots: SpotDistribution,
    pub market: Market,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            spots: SpotDistribution::Lognormal { s0: 10.0 },
            market: Market::default(),
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths must be at least 1".into()));
        }
        match self.spots {
            SpotDistribution::Lognormal { s0 } if !(s0 > 0.0 && s0.is_finite()) => {
                Err(Error::Config(format!("s0 must be positive, got {s0}")))
            }
            SpotDistribution::Uniform { lo, hi } if !(lo >= 0.0 && hi > lo) => Err(Error::Config(format!(
                "spot range [{lo}, {hi}] must satisfy 0 <= lo < hi"
            ))),
            _ => Ok(()),
        }
    }

    /// One sample per path, each path drawing from its own `(seed, index)` stream.
    pub fn simulate(&self, exec: Execution) -> Result<Vec<DualSample>> {
        self.validate()?;
        let m = self.market;
        Ok(map_indexed(exec, self.n_paths, |i| {
            let mut rng = stream_rng(self.seed, i as u64);
            let s_t = match self.spots {
                SpotDistribution::Lognormal { s0 } => {
                    let z0 = standard_normal(&mut rng);
                    s0 * ((m.rate - 0.5 * m.sigma * m.sigma) * m.t + m.sigma * m.t.sqrt() * z0).exp()
                }
                SpotDistribution::Uniform { lo, hi } => uniform(&mut rng, lo, hi),
            };
            m.payoff_sample(s_t, standard_normal(&mut rng))
        }))
    }
}
