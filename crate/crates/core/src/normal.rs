//! Standard normal distribution function.
//!
//! `norm_cdf(x) = erfc(-x / sqrt 2) / 2` with `erfc` from `libm` (a port of the
//! FreeBSD/musl implementation, accurate to about one ulp). The maximum
//! absolute error over the real line is below 1e-15; it is checked against a
//! table of 40-digit reference values in the tests.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}
