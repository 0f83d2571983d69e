//! Transition kernels of the interval walks and seeded trajectory sampling.
//!
//! A kernel `K(a, b)` is the density of moving to `a` from the current state
//! `b`. All walks share the same two-branch shape: from `x`, jump uniformly
//! into `(0, x)` or into `(x, 1)` (into `(1 - x, 1)` for the Y walk). The
//! p-family weights the left branch by `x^p` and the right by `(1 - x)^p`.
//!
//! [`step`] consumes randomness in a fixed order: one branch draw, then one
//! position draw. A position draw that rounds onto an endpoint is redrawn.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, domain, Error, Result};
use crate::rng::{derive_seed, open_unit, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Median-martingale walk: uniform on `(0, x)` or `(x, 1)` with equal odds.
    X,
    /// Mirrored walk: uniform on `(0, x)` or `(1 - x, 1)` with equal odds.
    Y,
    /// Left/right odds proportional to `x^p` and `(1 - x)^p`.
    PFamily,
    /// The p-family for `p < 0` with 0 and 1 made absorbing.
    PAbsorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub variant: Variant,
    /// Family exponent. Ignored by `X` and `Y`, which behave as `p = 0`.
    pub p: f64,
}

impl WalkParams {
    pub fn x() -> Self {
        Self { variant: Variant::X, p: 0.0 }
    }

    pub fn y() -> Self {
        Self { variant: Variant::Y, p: 0.0 }
    }

    pub fn family(p: f64) -> Result<Self> {
        let params = Self { variant: Variant::PFamily, p };
        params.validate()?;
        Ok(params)
    }

    pub fn absorbing(p: f64) -> Result<Self> {
        let params = Self { variant: Variant::PAbsorbing, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            Variant::X | Variant::Y => Ok(()),
            Variant::PFamily if self.p.is_finite() => Ok(()),
            Variant::PFamily => domain(format!("p-family exponent must be finite, got {}", self.p)),
            Variant::PAbsorbing if self.p < 0.0 && self.p.is_finite() => Ok(()),
            Variant::PAbsorbing => domain(format!("absorbing walk requires finite p < 0, got {}", self.p)),
        }
    }

    /// Exponent actually used by the dynamics.
    pub fn effective_p(&self) -> f64 {
        match self.variant {
            Variant::X | Variant::Y => 0.0,
            Variant::PFamily | Variant::PAbsorbing => self.p,
        }
    }

    fn is_absorbing(&self) -> bool {
        self.variant == Variant::PAbsorbing
    }
}

/// A state of the walk. Open unit interval, except that absorbing walks may
/// sit at exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalState(f64);

impl IntervalState {
    pub fn new(x: f64) -> Result<Self> {
        check_open_unit("state", x)?;
        Ok(Self(x))
    }

    pub fn closed(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Self(x))
        } else {
            domain(format!("state = {x} is outside [0, 1]"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Output of [`simulate`]. `states` holds the recorded values only, i.e.
/// every `thinning`-th state after the first `burn_in` transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub params: WalkParams,
    pub seed: u64,
    pub x0: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub states: Vec<f64>,
}

fn check_pair(a: f64, b: f64) -> Result<()> {
    check_open_unit("a", a)?;
    check_open_unit("b", b)
}

/// Kernel of the X walk. The diagonal `a == b` takes the `a < b` value.
pub fn kernel_x(a: f64, b: f64) -> Result<f64> {
    check_pair(a, b)?;
    Ok(kernel_x_unchecked(a, b))
}

pub(crate) fn kernel_x_unchecked(a: f64, b: f64) -> f64 {
    if a <= b {
        0.5 / b
    } else {
        0.5 / (1.0 - b)
    }
}

/// Kernel of the Y walk: `1/(2b)` on each of `(0, b)` and `(1 - b, 1)`,
/// zero elsewhere. When `b > 1/2` the two branches overlap on `(1 - b, b)`
/// and their densities add.
pub fn kernel_y(a: f64, b: f64) -> Result<f64> {
    check_pair(a, b)?;
    let hits = u8::from(a <= b) + u8::from(a > 1.0 - b);
    Ok(f64::from(hits) * 0.5 / b)
}

/// `ln(e^u + e^v)` without overflow.
pub(crate) fn log_add_exp(u: f64, v: f64) -> f64 {
    let (hi, lo) = if u >= v { (u, v) } else { (v, u) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Kernel of the p-family, evaluated in log space.
pub fn kernel_p(s: f64, x: f64, p: f64) -> Result<f64> {
    check_pair(s, x)?;
    if !p.is_finite() {
        return domain(format!("p = {p} is not finite"));
    }
    Ok(kernel_p_unchecked(s, x, p))
}

pub(crate) fn kernel_p_unchecked(s: f64, x: f64, p: f64) -> f64 {
    let (lx, l1x) = (x.ln(), (-x).ln_1p());
    let log_norm = log_add_exp(p * lx, p * l1x);
    let log_num = if s <= x { (p - 1.0) * lx } else { (p - 1.0) * l1x };
    (log_num - log_norm).exp()
}

/// Probability of jumping toward 0 from `x`: `x^p / (x^p + (1-x)^p)`.
pub fn branch_weight(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        return 0.5;
    }
    1.0 / (1.0 + (p * ((-x).ln_1p() - x.ln())).exp())
}

/// One transition given the two draws. `u_branch` in `[0, 1)` selects the
/// left branch when below the branch weight; `u_pos` in `(0, 1)` places
/// the state uniformly inside the chosen subinterval.
pub fn transition(x: f64, params: &WalkParams, u_branch: f64, u_pos: f64) -> f64 {
    let w0 = branch_weight(x, params.effective_p());
    if u_branch < w0 {
        x * u_pos
    } else if params.variant == Variant::Y {
        (1.0 - x) + x * u_pos
    } else {
        x + (1.0 - x) * u_pos
    }
}

pub fn step<R: Rng + ?Sized>(x: IntervalState, params: &WalkParams, rng: &mut R) -> Result<IntervalState> {
    let x = x.value();
    if params.is_absorbing() {
        if !(0.0..=1.0).contains(&x) {
            return domain(format!("state = {x} is outside [0, 1]"));
        }
        if x == 0.0 || x == 1.0 {
            return Ok(IntervalState(x));
        }
    } else {
        check_open_unit("state", x)?;
    }

    let u_branch: f64 = rng.random();
    loop {
        let next = transition(x, params, u_branch, open_unit(rng));
        // Absorbing walks may round onto an endpoint; that is absorption.
        if params.is_absorbing() || (next > 0.0 && next < 1.0) {
            return Ok(IntervalState(next));
        }
    }
}

/// Runs a chain and records `n_steps` states: `burn_in` transitions are
/// discarded, then every `thinning`-th state is kept.
pub fn simulate(
    params: WalkParams,
    x0: IntervalState,
    n_steps: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<ChainTrace> {
    params.validate()?;
    if n_steps == 0 {
        return domain("n_steps must be at least 1");
    }
    if thinning == 0 {
        return domain("thinning must be at least 1");
    }
    if params.is_absorbing() {
        IntervalState::closed(x0.value())?;
    } else {
        IntervalState::new(x0.value())?;
    }

    let mut rng = rng_from_seed(seed);
    let mut x = x0;
    for _ in 0..burn_in {
        x = step(x, &params, &mut rng)?;
    }
    let mut states = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        for _ in 0..thinning {
            x = step(x, &params, &mut rng)?;
        }
        states.push(x.value());
    }
    Ok(ChainTrace { params, seed, x0: x0.value(), burn_in, thinning, states })
}

/// Runs `n_chains` independent chains from `x0` and returns, for each entry
/// of `times`, the states of all chains after that many transitions.
/// Chain `i` uses seed `derive_seed(seed, i)`; `times` must be ascending.
pub fn chain_marginals(
    params: WalkParams,
    x0: IntervalState,
    times: &[usize],
    n_chains: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    if times.windows(2).any(|w| w[0] > w[1]) {
        return domain("times must be ascending");
    }
    let per_chain: Vec<Vec<f64>> = (0..n_chains as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i));
            let mut x = x0;
            let mut t = 0;
            let mut out = Vec::with_capacity(times.len());
            for &target in times {
                while t < target {
                    x = step(x, &params, &mut rng)?;
                    t += 1;
                }
                out.push(x.value());
            }
            Ok::<_, Error>(out)
        })
        .collect::<Result<_>>()?;

    Ok((0..times.len())
        .map(|j| per_chain.iter().map(|c| c[j]).collect())
        .collect())
}
