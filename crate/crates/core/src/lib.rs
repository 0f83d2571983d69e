//! Simulation and numerical verification of median-martingale random walks
//! on the unit interval.
//!
//! The walk at the centre of the crate jumps from `x` to a uniform point of
//! `(0, x)` or `(x, 1)` with equal odds; its stationary law is the arcsine
//! distribution. The crate also covers the power-weighted family of such
//! walks, a function-valued Brownian chain whose occupation times follow a
//! mirrored version of the walk, the `ℓq` objectives behind the
//! martingale-like property, and the absorbing regime `p < 0`.
//!
//! | module | contents |
//! |---|---|
//! | [`kernels`] | transition kernels, seeded stepping and trajectories |
//! | [`density`] | stationary densities, `Z_p`, fixed-point residuals |
//! | [`quadrature`] | adaptive Gauss–Kronrod integration |
//! | [`brownian`] | bridge, meander, splice, occupation time, last zero |
//! | [`lq`] | `ℓq` objectives, minimizers, critical-point classification |
//! | [`absorption`] | absorbing walks and their Bernoulli limit |
//! | [`stats`] | Kolmogorov–Smirnov and binned total-variation checks |
//!
//! ```
//! use arcwalk::density::arcsine_cdf;
//! use arcwalk::kernels::simulate;
//! use arcwalk::stats::ks_statistic;
//! use arcwalk::{IntervalState, WalkParams};
//!
//! let x0 = IntervalState::new(0.5)?;
//! let trace = simulate(WalkParams::x(), x0, 20_000, 1000, 5, 7)?;
//! let d = ks_statistic(&trace.states, |s| arcsine_cdf(s).unwrap())?;
//! assert!(d < 0.03);
//! # Ok::<(), arcwalk::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod absorption;
pub mod brownian;
pub mod density;
mod error;
pub mod kernels;
pub mod lq;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use density::DensityModel;
pub use error::{Error, Result};
pub use kernels::{ChainTrace, IntervalState, Variant, WalkParams};
pub use quadrature::QuadratureConfig;
pub use rng::{derive_seed, rng_from_seed, WalkRng};
pub use stats::{GofReport, GofTest};
