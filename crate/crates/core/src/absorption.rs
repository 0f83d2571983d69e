//! The `p < 0` walk with absorbing endpoints.
//!
//! For negative `p` the walk drifts toward whichever endpoint is nearer and
//! its law converges to a Bernoulli distribution. A continuous state never
//! reaches 0 or 1 in finite time, so a run counts as absorbed once it enters
//! `[0, eps]` or `[1 - eps, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::lp_mean;
use crate::error::{check_open_unit, domain, Result};
use crate::kernels::{step, IntervalState, WalkParams};
use crate::rng::{par_replicates, rng_from_seed};

pub const DEFAULT_EPS: f64 = 1e-9;
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// Limiting probability of absorption at 1 from `x`:
/// `1/2 - (x^(p-1) - (1-x)^(p-1)) / (2^(2 - 1/p) M_p(x, 1-x)^(p-1))`.
pub fn bernoulli_limit_mean(x: f64, p: f64) -> Result<f64> {
    check_open_unit("x", x)?;
    if !(p < 0.0 && p.is_finite()) {
        return domain(format!("absorption needs finite p < 0, got {p}"));
    }
    let m = lp_mean(x, 1.0 - x, p)?;
    let num = x.powf(p - 1.0) - (1.0 - x).powf(p - 1.0);
    let den = 2f64.powf(2.0 - 1.0 / p) * m.powf(p - 1.0);
    Ok(0.5 - num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbsorptionOutcome {
    AbsorbedAtZero,
    AbsorbedAtOne,
    Undecided,
}

fn classify(x: f64, eps: f64) -> Option<AbsorptionOutcome> {
    if x <= eps {
        Some(AbsorptionOutcome::AbsorbedAtZero)
    } else if x >= 1.0 - eps {
        Some(AbsorptionOutcome::AbsorbedAtOne)
    } else {
        None
    }
}

fn check_args(p: f64, x0: f64, eps: f64) -> Result<WalkParams> {
    check_open_unit("x0", x0)?;
    if !(eps > 0.0 && eps < 0.5) {
        return domain(format!("eps = {eps} is outside (0, 1/2)"));
    }
    WalkParams::absorbing(p)
}

pub fn simulate_absorbing_with<R: Rng + ?Sized>(
    p: f64,
    x0: f64,
    max_steps: usize,
    eps: f64,
    rng: &mut R,
) -> Result<AbsorptionOutcome> {
    let params = check_args(p, x0, eps)?;
    if let Some(done) = classify(x0, eps) {
        return Ok(done);
    }
    let mut x = IntervalState::closed(x0)?;
    for _ in 0..max_steps {
        x = step(x, &params, rng)?;
        if let Some(done) = classify(x.value(), eps) {
            return Ok(done);
        }
    }
    Ok(AbsorptionOutcome::Undecided)
}

pub fn simulate_absorbing(p: f64, x0: f64, max_steps: usize, eps: f64, seed: u64) -> Result<AbsorptionOutcome> {
    simulate_absorbing_with(p, x0, max_steps, eps, &mut rng_from_seed(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionSummary {
    pub runs: usize,
    pub at_zero: usize,
    pub at_one: usize,
    pub undecided: usize,
}

impl AbsorptionSummary {
    pub fn fraction_at_one(&self) -> f64 {
        self.at_one as f64 / self.runs as f64
    }

    /// Binomial standard error of [`Self::fraction_at_one`] under success
    /// probability `mean`.
    pub fn standard_error(&self, mean: f64) -> f64 {
        (mean * (1.0 - mean) / self.runs as f64).sqrt()
    }
}

/// `runs` independent absorbing runs; run `i` is seeded by
/// `derive_seed(seed, i)`.
pub fn absorption_frequency(p: f64, x0: f64, runs: usize, max_steps: usize, eps: f64, seed: u64) -> Result<AbsorptionSummary> {
    check_args(p, x0, eps)?;
    if runs == 0 {
        return domain("runs must be at least 1");
    }
    let outcomes = par_replicates(runs, seed, |_, rng| simulate_absorbing_with(p, x0, max_steps, eps, rng));
    let mut summary = AbsorptionSummary { runs, at_zero: 0, at_one: 0, undecided: 0 };
    for outcome in outcomes {
        match outcome? {
            AbsorptionOutcome::AbsorbedAtZero => summary.at_zero += 1,
            AbsorptionOutcome::AbsorbedAtOne => summary.at_one += 1,
            AbsorptionOutcome::Undecided => summary.undecided += 1,
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        for p in [-0.3, -1.0, -4.0] {
            assert!((bernoulli_limit_mean(0.5, p).unwrap() - 0.5).abs() < 1e-15);
        }
        assert!((bernoulli_limit_mean(0.3, -1.0).unwrap() - 0.3).abs() < 1e-14);
        // symmetric under x -> 1 - x
        let a = bernoulli_limit_mean(0.3, -2.0).unwrap();
        let b = bernoulli_limit_mean(0.7, -2.0).unwrap();
        assert!((a + b - 1.0).abs() < 1e-14);
        assert!(bernoulli_limit_mean(0.3, 0.5).is_err());
        assert!(bernoulli_limit_mean(0.0, -1.0).is_err());
    }

    #[test]
    fn starting_in_the_band_is_immediate() {
        let eps = 1e-9;
        assert_eq!(simulate_absorbing(-1.0, eps / 2.0, 0, eps, 1).unwrap(), AbsorptionOutcome::AbsorbedAtZero);
        assert_eq!(simulate_absorbing(-1.0, 1.0 - eps / 2.0, 0, eps, 1).unwrap(), AbsorptionOutcome::AbsorbedAtOne);
        assert_eq!(simulate_absorbing(-1.0, 0.5, 0, eps, 1).unwrap(), AbsorptionOutcome::Undecided);
        assert!(simulate_absorbing(0.5, 0.5, 10, eps, 1).is_err());
        assert!(simulate_absorbing(-1.0, 0.5, 10, 0.0, 1).is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let a = absorption_frequency(-1.0, 0.4, 500, 1000, 1e-9, 3).unwrap();
        let b = absorption_frequency(-1.0, 0.4, 500, 1000, 1e-9, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.at_zero + a.at_one + a.undecided, 500);
        assert!(absorption_frequency(-1.0, 0.4, 0, 1000, 1e-9, 3).is_err());
    }

    #[test]
    fn undecided_fraction_shrinks_with_budget() {
        let undecided: Vec<usize> = [10, 30, 100]
            .iter()
            .map(|&m| absorption_frequency(-1.0, 0.5, 5000, m, 1e-9, 4).unwrap().undecided)
            .collect();
        assert!(undecided[0] > undecided[1] && undecided[1] > undecided[2], "{undecided:?}");
    }
}
