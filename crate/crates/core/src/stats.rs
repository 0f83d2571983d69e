//! Goodness-of-fit checks used by the Monte Carlo tests and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::{integrate_unit, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GofTest {
    KS,
    TVBinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub test: GofTest,
    pub statistic: f64,
    pub n_samples: usize,
    pub threshold: f64,
    pub pass: bool,
}

impl GofReport {
    pub fn new(test: GofTest, statistic: f64, n_samples: usize, threshold: f64) -> Self {
        Self { test, statistic, n_samples, threshold, pass: statistic <= threshold }
    }
}

/// Two-sided Kolmogorov–Smirnov distance between the empirical law of
/// `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return domain("KS statistic of an empty sample");
    }
    if samples.iter().any(|s| s.is_nan()) {
        return domain("sample contains NaN");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    }))
}

pub fn ks_report<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, threshold: f64) -> Result<GofReport> {
    let d = ks_statistic(samples, cdf)?;
    Ok(GofReport::new(GofTest::KS, d, samples.len(), threshold))
}

/// Total variation between the histogram of `samples` on `n_bins` equal
/// bins of `(0, 1)` and the bin masses of `density`.
pub fn tv_binned<F: Fn(f64) -> f64>(samples: &[f64], density: F, n_bins: usize, cfg: &QuadratureConfig) -> Result<f64> {
    if n_bins < 2 {
        return domain("need at least two bins");
    }
    let masses = (0..n_bins)
        .map(|b| {
            let (lo, hi) = (b as f64 / n_bins as f64, (b + 1) as f64 / n_bins as f64);
            integrate_unit(&density, lo, hi, &[], cfg).map(|r| r.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    tv_against_masses(samples, &masses)
}

/// As [`tv_binned`] with the bin masses given directly.
pub fn tv_against_masses(samples: &[f64], masses: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return domain("TV distance of an empty sample");
    }
    let n_bins = masses.len();
    let mut counts = vec![0usize; n_bins];
    for &s in samples {
        if !(s > 0.0 && s < 1.0) {
            return domain(format!("sample {s} is outside (0, 1)"));
        }
        counts[((s * n_bins as f64) as usize).min(n_bins - 1)] += 1;
    }
    let n = samples.len() as f64;
    Ok(0.5 * counts.iter().zip(masses).map(|(&c, &m)| (c as f64 / n - m).abs()).sum::<f64>())
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance and its standard error, `sqrt(Var((X - mean)^2) / n)`.
pub fn variance_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let (m, se) = mean_and_se(&sq);
    (m * n / (n - 1.0), se)
}
