//! Neural approximation of one-dimensional functions and conditional
//! expectations with enforced linear asymptotes.
//!
//! A plain feed-forward network is wrapped as
//! `f(x) = A(x) + N(x) Z(x)` on a window `[ll, ul]` and `f(x) = A(x)` outside,
//! where `A` is a pair of linear asymptotes joined by a C¹ cubic and `Z` is a
//! polynomial with double roots at the window edges. Training fits values
//! only (VML) or values and derivatives (DML).
//!
//! The [`experiment`] module drives the three reference experiments
//! (a synthetic function, the Black-Scholes price, and Black-Scholes
//! regression from simulated payoffs).

// `!(a < b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adam;
pub mod asymptotics;
pub mod data;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod model;
pub mod neural;
pub mod normal;
pub mod problems;
pub mod rng;
pub mod training;

pub use asymptotics::{fit_asymptotes, AsymptoticParams, CubicBlendCoefficients, ZeroBlend};
pub use data::DualSample;
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{CompositeModel, Normalization, Treatment};
pub use neural::Mlp;
pub use training::{train, LossKind, TrainConfig, TrainingTrace};
