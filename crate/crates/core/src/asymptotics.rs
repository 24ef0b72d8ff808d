//! Linear asymptotes, their C¹ cubic extension across the window `[ll, ul]`,
//! and the double-root blending polynomial that forces corrections to vanish
//! at the window edges.
//!
//! Outside the window the asymptotic form is
//!
//! ```text
//! x <= ll:  ls (x - ll) + li
//! x >= ul:  us (x - ul) + ui
//! ```
//!
//! Inside, with `w = ul - ll` and `t = x - ll`,
//!
//! ```text
//! s0 = (ui - li) / w
//! ls~ = (ls - s0) / w,  us~ = (s0 - us) / w,  a0 = (us~ - ls~) / w
//! g(x) = t (ul - x) (a0 t + ls~) + s0 t + li
//! ```
//!
//! which matches value and slope of both lines at the edges. The blending
//! polynomial is `(x - ul)^2 (x - ll)^2 * scale` inside and zero outside, with
//! `scale = 1 / (ll * ul)` unless overridden.

use serde::{Deserialize, Serialize};

use crate::data::DualSample;
use crate::error::{Error, Result, Side};

/// Window widths below this (relative to the level magnitudes) are rejected.
const MIN_RELATIVE_WIDTH: f64 = 1e-10;

/// The constrained-intercept option only anchors on a sample closer than this
/// fraction of the window width to the level.
const ANCHOR_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticParams {
    /// Lower level: below it the lower line is exact.
    pub ll: f64,
    /// Lower intercept, the value at `ll`.
    pub li: f64,
    /// Lower slope.
    pub ls: f64,
    /// Upper level.
    pub ul: f64,
    /// Upper intercept, the value at `ul`.
    pub ui: f64,
    /// Upper slope.
    pub us: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBlendCoefficients {
    pub s0: f64,
    pub ls_tilde: f64,
    pub us_tilde: f64,
    pub a0: f64,
}

/// Partial derivatives with respect to the trainable coefficients, in the
/// order `(ls, li, us, ui)`.
pub type CoefGrad = [f64; 4];

impl AsymptoticParams {
    pub fn new(ll: f64, li: f64, ls: f64, ul: f64, ui: f64, us: f64) -> Result<Self> {
        let p = Self { ll, li, ls, ul, ui, us };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.ll, self.li, self.ls, self.ul, self.ui, self.us];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAsymptotics(format!(
                "all fields must be finite, got {self:?}"
            )));
        }
        if !(self.ll < self.ul) {
            return Err(Error::InvalidAsymptotics(format!(
                "lower level {} must be strictly below upper level {}",
                self.ll, self.ul
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.ul - self.ll
    }

    /// Coefficients `(ls, li, us, ui)` in trainable-vector order.
    pub fn coefficients(&self) -> [f64; 4] {
        [self.ls, self.li, self.us, self.ui]
    }

    pub fn with_coefficients(&self, c: [f64; 4]) -> Self {
        Self {
            ls: c[0],
            li: c[1],
            us: c[2],
            ui: c[3],
            ..*self
        }
    }

    pub fn blend_coefficients(&self) -> Result<CubicBlendCoefficients> {
        self.validate()?;
        let scale = 1.0_f64.max(self.ll.abs()).max(self.ul.abs());
        if self.width() < MIN_RELATIVE_WIDTH * scale {
            return Err(Error::InvalidAsymptotics(format!(
                "degenerate window: ul - ll = {} is below {:e}",
                self.width(),
                MIN_RELATIVE_WIDTH * scale
            )));
        }
        Ok(self.coeffs())
    }

    fn coeffs(&self) -> CubicBlendCoefficients {
        let w = self.width();
        let s0 = (self.ui - self.li) / w;
        let ls_tilde = (self.ls - s0) / w;
        let us_tilde = (s0 - self.us) / w;
        let a0 = (us_tilde - ls_tilde) / w;
        CubicBlendCoefficients {
            s0,
            ls_tilde,
            us_tilde,
            a0,
        }
    }

    /// Value of the extended asymptotic form. `x == ll` takes the cubic
    /// branch, `x == ul` the upper line.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.ll {
            self.ls * (x - self.ll) + self.li
        } else if x < self.ul {
            let c = self.coeffs();
            let t = x - self.ll;
            t * (self.ul - x) * (c.a0 * t + c.ls_tilde) + (c.s0 * t + self.li)
        } else {
            self.us * (x - self.ul) + self.ui
        }
    }

    pub fn eval_dx(&self, x: f64) -> f64 {
        if x < self.ll {
            self.ls
        } else if x < self.ul {
            let c = self.coeffs();
            let t = x - self.ll;
            let q = t * (self.ul - x);
            let dq = self.ul + self.ll - 2.0 * x;
            dq * (c.a0 * t + c.ls_tilde) + q * c.a0 + c.s0
        } else {
            self.us
        }
    }

    /// Gradient of [`eval`](Self::eval) with respect to `(ls, li, us, ui)`.
    pub fn eval_dparams(&self, x: f64) -> CoefGrad {
        if x < self.ll {
            [x - self.ll, 1.0, 0.0, 0.0]
        } else if x < self.ul {
            let w = self.width();
            let (w2, w3) = (w * w, w * w * w);
            let t = x - self.ll;
            let q = t * (self.ul - x);
            // a0 = (2 s0 - ls - us) / w^2, s0 = (ui - li) / w, ls~ = (ls - s0) / w
            let d_ls = q * (1.0 / w - t / w2);
            let d_us = -q * t / w2;
            let d_ui = q * (2.0 * t / w3 - 1.0 / w2) + t / w;
            let d_li = q * (1.0 / w2 - 2.0 * t / w3) - t / w + 1.0;
            [d_ls, d_li, d_us, d_ui]
        } else {
            [0.0, 0.0, x - self.ul, 1.0]
        }
    }

    /// Gradient of [`eval_dx`](Self::eval_dx) with respect to `(ls, li, us, ui)`.
    pub fn eval_dx_dparams(&self, x: f64) -> CoefGrad {
        if x < self.ll {
            [1.0, 0.0, 0.0, 0.0]
        } else if x < self.ul {
            let w = self.width();
            let (w2, w3) = (w * w, w * w * w);
            let t = x - self.ll;
            let q = t * (self.ul - x);
            let dq = self.ul + self.ll - 2.0 * x;
            let d_ls = dq * (1.0 / w - t / w2) - q / w2;
            let d_us = -dq * t / w2 - q / w2;
            let d_ui = dq * (2.0 * t / w3 - 1.0 / w2) + 2.0 * q / w3 + 1.0 / w;
            let d_li = dq * (1.0 / w2 - 2.0 * t / w3) - 2.0 * q / w3 - 1.0 / w;
            [d_ls, d_li, d_us, d_ui]
        } else {
            [0.0, 0.0, 1.0, 0.0]
        }
    }
}

/// Compact-support blending polynomial with double roots at `ll` and `ul`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroBlend {
    pub ll: f64,
    pub ul: f64,
    pub scale: f64,
}

impl ZeroBlend {
    /// Uses `1 / (ll * ul)` as the scale, sign included.
    pub fn literal(p: &AsymptoticParams) -> Result<Self> {
        p.validate()?;
        let prod = p.ll * p.ul;
        if prod == 0.0 {
            return Err(Error::ZeroLevelProduct { ll: p.ll, ul: p.ul });
        }
        Ok(Self {
            ll: p.ll,
            ul: p.ul,
            scale: 1.0 / prod,
        })
    }

    pub fn with_scale(p: &AsymptoticParams, scale: f64) -> Result<Self> {
        p.validate()?;
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Config(format!(
                "zasymptotic_scale must be finite and nonzero, got {scale}"
            )));
        }
        Ok(Self {
            ll: p.ll,
            ul: p.ul,
            scale,
        })
    }

    /// Literal scale unless `scale_override` is given.
    pub fn resolve(p: &AsymptoticParams, scale_override: Option<f64>) -> Result<Self> {
        match scale_override {
            Some(s) => Self::with_scale(p, s),
            None => Self::literal(p),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.ll || x >= self.ul {
            return 0.0;
        }
        let a = x - self.ul;
        let b = x - self.ll;
        a * a * b * b * self.scale
    }

    pub fn eval_dx(&self, x: f64) -> f64 {
        if x <= self.ll || x >= self.ul {
            return 0.0;
        }
        let a = x - self.ul;
        let b = x - self.ll;
        2.0 * a * b * (a + b) * self.scale
    }
}

/// Least-squares estimate of the asymptote coefficients from samples lying
/// in the asymptotic regions `x <= ll` and `x >= ul`. Each side is an
/// ordinary regression in shifted coordinates `x - level`, so the intercept
/// is the fitted value at the level.
///
/// With `constrain_intercepts`, each intercept is pinned to the target of the
/// sample nearest its level (when that sample lies within 1% of the window
/// width) and the slope is refit with the intercept held fixed.
pub fn fit_asymptotes(
    samples: &[DualSample],
    ll: f64,
    ul: f64,
    constrain_intercepts: bool,
) -> Result<AsymptoticParams> {
    if !(ll.is_finite() && ul.is_finite() && ll < ul) {
        return Err(Error::InvalidAsymptotics(format!(
            "levels must be finite with ll < ul, got ll={ll}, ul={ul}"
        )));
    }
    let lower: Vec<(f64, f64)> = samples.iter().filter(|s| s.x <= ll).map(|s| (s.x - ll, s.y)).collect();
    let upper: Vec<(f64, f64)> = samples.iter().filter(|s| s.x >= ul).map(|s| (s.x - ul, s.y)).collect();

    let (mut li, mut ls) = ols_line(&lower, Side::Lower)?;
    let (mut ui, mut us) = ols_line(&upper, Side::Upper)?;

    if constrain_intercepts {
        let tol = ANCHOR_FRACTION * (ul - ll);
        if let Some(anchor) = nearest_target(samples, ll, tol) {
            li = anchor;
            ls = slope_through(&lower, anchor, Side::Lower)?;
        }
        if let Some(anchor) = nearest_target(samples, ul, tol) {
            ui = anchor;
            us = slope_through(&upper, anchor, Side::Upper)?;
        }
    }

    AsymptoticParams::new(ll, li, ls, ul, ui, us)
}

/// Returns `(intercept, slope)` of the OLS line through `pts`.
fn ols_line(pts: &[(f64, f64)], side: Side) -> Result<(f64, f64)> {
    if pts.len() < 2 {
        return Err(Error::InsufficientSamples { side, found: pts.len() });
    }
    let n = pts.len() as f64;
    let mean_u = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut suu, mut suy) = (0.0, 0.0);
    for &(u, y) in pts {
        let du = u - mean_u;
        suu += du * du;
        suy += du * (y - mean_y);
    }
    let spread = pts.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    if suu <= (1e-14 * spread).powi(2) * n || suu == 0.0 {
        return Err(Error::DegenerateFit { side });
    }
    let slope = suy / suu;
    Ok((mean_y - slope * mean_u, slope))
}

fn slope_through(pts: &[(f64, f64)], intercept: f64, side: Side) -> Result<f64> {
    let suu: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    if suu == 0.0 {
        return Err(Error::DegenerateFit { side });
    }
    let suy: f64 = pts.iter().map(|p| p.0 * (p.1 - intercept)).sum();
    Ok(suy / suu)
}

fn nearest_target(samples: &[DualSample], level: f64, tol: f64) -> Option<f64> {
    samples
        .iter()
        .map(|s| ((s.x - level).abs(), s.y))
        .filter(|(d, _)| *d < tol)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, y)| y)
}
