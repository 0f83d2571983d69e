//! Globally adaptive 15-point Gauss–Kronrod quadrature.
//!
//! The subinterval with the largest error estimate is bisected until the
//! summed error meets `max(abs_tol, rel_tol * |I|)`. Known kernel
//! discontinuities are passed as break points so that no panel straddles
//! a jump.
//!
//! [`integrate_unit`] is the entry point for densities on `(0, 1)` with
//! inverse-square-root endpoint singularities: it substitutes
//! `s = sin^2(theta)`, whose Jacobian `2 sqrt(s(1-s))` cancels them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Evaluation points of [`integrate_unit`] are clamped to
    /// `[endpoint_offset, 1 - endpoint_offset]`.
    pub endpoint_offset: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_subdivisions: 4000,
            endpoint_offset: 1e-10,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return domain("quadrature tolerances must be positive");
        }
        if self.max_subdivisions == 0 {
            return domain("max_subdivisions must be at least 1");
        }
        if !(self.endpoint_offset > 0.0 && self.endpoint_offset <= 1e-6) {
            return domain(format!("endpoint_offset = {} is outside (0, 1e-6]", self.endpoint_offset));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    splittable: bool,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let error = rescale_error(err, res_abs * half.abs(), res_asc * half.abs());
    let width = hi - lo;
    Panel {
        lo,
        hi,
        value: res_k * half,
        error,
        splittable: width > 1e3 * f64::EPSILON * center.abs().max(f64::MIN_POSITIVE),
    }
}

/// Integrates `f` over `[points[0], points[last]]`, treating every interior
/// point as a break.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], cfg: &QuadratureConfig) -> Result<Integral> {
    cfg.validate()?;
    if points.len() < 2 {
        return domain("need at least two integration points");
    }
    if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] > w[1]) {
        return domain("integration points must be finite and ascending");
    }

    let mut panels: Vec<Panel> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();

    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return domain("integrand produced a non-finite value");
        }
        if error <= cfg.abs_tol.max(cfg.rel_tol * value.abs()) {
            return Ok(Integral { value, error });
        }
        let worst = panels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.splittable)
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst.filter(|_| panels.len() < cfg.max_subdivisions) else {
            return Err(Error::Quadrature {
                lo: points[0],
                hi: points[points.len() - 1],
                estimate: value,
                error,
                subdivisions: panels.len(),
            });
        };
        let old = panels.swap_remove(i);
        let mid = 0.5 * (old.lo + old.hi);
        panels.push(gk15(&f, old.lo, mid));
        panels.push(gk15(&f, mid, old.hi));
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<Integral> {
    integrate_with_breaks(f, &[lo, hi], cfg)
}

/// `∫ f(s) ds` over `[lo, hi] ⊆ [0, 1]` via `s = sin^2(theta)`, with
/// `breaks` (in `s`) kept as panel edges.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Integral> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return domain(format!("[{lo}, {hi}] is not a subinterval of [0, 1]"));
    }
    let to_theta = |s: f64| s.sqrt().asin();
    let mut thetas = vec![to_theta(lo), to_theta(hi)];
    thetas.extend(breaks.iter().filter(|&&b| b > lo && b < hi).map(|&b| to_theta(b)));
    thetas.sort_by(f64::total_cmp);
    thetas.dedup();

    let off = cfg.endpoint_offset;
    integrate_with_breaks(
        |theta: f64| {
            let sin = theta.sin();
            let s = (sin * sin).clamp(off, 1.0 - off);
            f(s) * 2.0 * (s * (1.0 - s)).sqrt()
        },
        &thetas,
        cfg,
    )
}
