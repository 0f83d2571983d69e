//! Stationary densities of the walks and the quadrature checks of `Kρ = ρ`.
//!
//! For `p > 0` the stationary density is `1 / (Z_p · M_p(s, 1 - s))`, where
//! `M_p` is the power mean of the distances to the two endpoints. `p = 0`
//! (the geometric mean) is the arcsine law with `Z_0 = π`; it is handled in
//! closed form rather than as a limit.

use std::collections::HashMap;
use std::f64::consts::{FRAC_2_PI, FRAC_1_PI, PI};
use std::sync::{OnceLock, RwLock};

use crate::error::{check_open_unit, domain, Error, Result};
use crate::kernels;
use crate::quadrature::{integrate_unit, integrate_with_breaks, QuadratureConfig};

/// Power mean `((a^p + b^p) / 2)^(1/p)`, with the limits `sqrt(ab)` at
/// `p = 0`, `max(a, b)` at `+inf` and `min(a, b)` at `-inf`.
pub fn lp_mean(a: f64, b: f64, p: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) || !a.is_finite() || !b.is_finite() {
        return domain(format!("power mean needs finite non-negative inputs, got ({a}, {b})"));
    }
    if p.is_nan() {
        return domain("p is NaN");
    }
    if p <= 0.0 && a == 0.0 && b == 0.0 {
        return domain("power mean of (0, 0) is undefined for p <= 0");
    }
    if p == f64::INFINITY {
        return Ok(a.max(b));
    }
    if p == f64::NEG_INFINITY {
        return Ok(a.min(b));
    }
    if p == 0.0 {
        return Ok((a * b).sqrt());
    }
    if p < 0.0 && (a == 0.0 || b == 0.0) {
        return Ok(0.0);
    }
    if p > 0.0 && (a == 0.0 || b == 0.0) {
        return Ok(a.max(b) * 0.5f64.powf(1.0 / p));
    }
    Ok((log_power_sum_mean(a.ln(), b.ln(), p) / p).exp())
}

/// `ln((e^(p·la) + e^(p·lb)) / 2)` as `max + ln((1 + e^d) / 2)` with
/// `d = min - max <= 0`; the expm1/ln1p pair keeps precision as `p -> 0`.
fn log_power_sum_mean(la: f64, lb: f64, p: f64) -> f64 {
    let (u, v) = (p * la, p * lb);
    let (hi, lo) = if u >= v { (u, v) } else { (v, u) };
    hi + (0.5 * (lo - hi).exp_m1()).ln_1p()
}

pub fn rho_arcsine(s: f64) -> Result<f64> {
    check_open_unit("s", s)?;
    Ok(FRAC_1_PI / (s * (1.0 - s)).sqrt())
}

pub fn arcsine_cdf(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return domain(format!("s = {s} is outside [0, 1]"));
    }
    Ok(FRAC_2_PI * s.sqrt().asin())
}

pub fn arcsine_quantile(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("u = {u} is outside [0, 1]"));
    }
    let sin = (0.5 * PI * u).sin();
    Ok(sin * sin)
}

/// `1 / M_p(s, 1 - s)` for `p != 0`.
fn reciprocal_mean(s: f64, p: f64) -> f64 {
    (-log_power_sum_mean(s.ln(), (-s).ln_1p(), p) / p).exp()
}

type ZCache = RwLock<HashMap<(u64, u64, u64), f64>>;

fn z_cache() -> &'static ZCache {
    static CACHE: OnceLock<ZCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Normalizing constant `∫_0^1 ds / M_p(s, 1 - s)`, always in `(2 ln 2, π)`.
/// Results are cached per exact bit pattern of `p` and the tolerances.
pub fn z_p(p: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(p > 0.0) {
        return domain(format!("Z_p is defined for p > 0, got {p}"));
    }
    if p == f64::INFINITY {
        return Ok(2.0 * std::f64::consts::LN_2);
    }
    let key = (p.to_bits(), cfg.abs_tol.to_bits(), cfg.rel_tol.to_bits());
    if let Some(&z) = z_cache().read().expect("z cache poisoned").get(&key) {
        return Ok(z);
    }
    // symmetric about 1/2
    let half = integrate_unit(|s| reciprocal_mean(s, p), 0.0, 0.5, &[], cfg)?;
    let z = 2.0 * half.value;
    z_cache().write().expect("z cache poisoned").insert(key, z);
    Ok(z)
}

pub fn rho_p(s: f64, p: f64, cfg: &QuadratureConfig) -> Result<f64> {
    check_open_unit("s", s)?;
    let z = z_p(p, cfg)?;
    Ok(reciprocal_mean(s, p) / z)
}

/// `∫_eps^(1-eps) ds / M_p(s, 1 - s)` for any finite `p != 0`. For `p < 0`
/// this diverges like `log(1/eps)`.
pub fn reciprocal_mean_integral(p: f64, eps: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(p.is_finite() && p != 0.0) {
        return domain(format!("p = {p} must be finite and non-zero"));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return domain(format!("eps = {eps} is outside (0, 1/2)"));
    }
    let half = integrate_with_breaks(|s| reciprocal_mean(s, p), &[eps, 0.5], cfg)?;
    Ok(2.0 * half.value)
}

/// Analytic stationary density for `p >= 0` with CDF access.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityModel {
    pub p: f64,
    pub z_p: f64,
    cfg: QuadratureConfig,
}

impl DensityModel {
    pub fn new(p: f64, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        let z_p = if p == 0.0 { PI } else { z_p(p, &cfg)? };
        Ok(Self { p, z_p, cfg })
    }

    pub fn arcsine() -> Self {
        Self { p: 0.0, z_p: PI, cfg: QuadratureConfig::default() }
    }

    /// Density, zero outside `(0, 1)`.
    pub fn pdf(&self, s: f64) -> f64 {
        if !(s > 0.0 && s < 1.0) {
            return 0.0;
        }
        if self.p == 0.0 {
            FRAC_1_PI / (s * (1.0 - s)).sqrt()
        } else {
            reciprocal_mean(s, self.p) / self.z_p
        }
    }

    /// CDF, clamped to `[0, 1]` outside the support.
    pub fn cdf(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        if self.p == 0.0 {
            return FRAC_2_PI * s.sqrt().asin();
        }
        if self.p == 1.0 {
            return s;
        }
        let (t, flip) = if s > 0.5 { (1.0 - s, true) } else { (s, false) };
        // A missed tolerance still leaves an estimate far below KS resolution.
        let mass = match integrate_unit(|u| self.pdf(u), 0.0, t, &[], &self.cfg) {
            Ok(r) => r.value,
            Err(Error::Quadrature { estimate, .. }) => estimate,
            Err(e) => unreachable!("cdf quadrature on a valid interval: {e}"),
        };
        if flip { 1.0 - mass } else { mass }
    }
}

/// `(Kρ)(a) = ∫_0^1 K(a, b) ρ(b) db`, split at the kernel breaks `b = a`
/// and `b = 1 - a`.
pub fn apply_kernel<D, K>(density: D, kernel: K, a: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    D: Fn(f64) -> f64,
    K: Fn(f64, f64) -> f64,
{
    check_open_unit("a", a)?;
    let r = integrate_unit(|b| kernel(a, b) * density(b), 0.0, 1.0, &[a, 1.0 - a], cfg)?;
    Ok(r.value)
}

/// Largest relative violation of `Kρ = ρ` over `grid`. `p = 0` checks the
/// arcsine density against the X kernel, `p > 0` checks `ρ_p` against `K_p`.
pub fn stationarity_residual(p: f64, grid: &[f64], cfg: &QuadratureConfig) -> Result<f64> {
    Ok(stationarity_table(p, grid, cfg)?
        .iter()
        .map(|r| r.relative)
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResidualRow {
    pub a: f64,
    /// `(Kρ)(a)`
    pub image: f64,
    /// `ρ(a)`
    pub density: f64,
    pub relative: f64,
}

pub fn stationarity_table(p: f64, grid: &[f64], cfg: &QuadratureConfig) -> Result<Vec<ResidualRow>> {
    if !(p >= 0.0 && p.is_finite()) {
        return domain(format!("stationary density needs finite p >= 0, got {p}"));
    }
    if grid.is_empty() {
        return domain("grid is empty");
    }
    for &a in grid {
        check_open_unit("grid point", a)?;
    }
    let model = DensityModel::new(p, *cfg)?;
    let kernel = |a: f64, b: f64| {
        if p == 0.0 {
            kernels::kernel_x_unchecked(a, b)
        } else {
            kernels::kernel_p_unchecked(a, b, p)
        }
    };
    grid.iter()
        .map(|&a| {
            let image = apply_kernel(|b| model.pdf(b), kernel, a, cfg)?;
            let density = model.pdf(a);
            Ok(ResidualRow { a, image, density, relative: (image - density).abs() / density })
        })
        .collect()
}
