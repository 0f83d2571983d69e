//! The function-valued hidden chain.
//!
//! Each state is a discretized path on `[0, 1]`. A step samples a Brownian
//! bridge, a Brownian meander and a random sign, then splices them: the
//! bridge is time-compressed onto `[0, y]` and the signed meander onto
//! `[y, 1]`, where `y` is the positive occupation time of the previous path.
//! Both pieces are amplitude-scaled (`sqrt(y)`, `sqrt(1 - y)`) so that the
//! result is standard Brownian motion when `y` is arcsine distributed.
//!
//! Paths live on a uniform grid `s_k = k / n`, `k = 0..=n`, with `n` a power
//! of two.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_unit, domain, Result};
use crate::rng::open_unit;

pub const DEFAULT_GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathGrid {
    n: usize,
}

impl PathGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n >= 2 && n.is_power_of_two() {
            Ok(Self { n })
        } else {
            domain(format!("grid size {n} must be a power of two >= 2"))
        }
    }

    pub fn n(self) -> usize {
        self.n
    }

    pub fn point(self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    /// Index of the grid point closest to `s`.
    pub fn nearest(self, s: f64) -> usize {
        ((s * self.n as f64).round() as usize).min(self.n)
    }
}

impl Default for PathGrid {
    fn default() -> Self {
        Self { n: DEFAULT_GRID }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    Free,
    Bridge,
    Meander,
    Spliced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub grid: PathGrid,
    /// `values[k]` is the path at `k / n`; `values[0] == 0`.
    pub values: Vec<f64>,
    pub kind: PathKind,
}

impl BrownianPath {
    pub fn new(grid: PathGrid, values: Vec<f64>, kind: PathKind) -> Result<Self> {
        if values.len() != grid.n + 1 {
            return domain(format!("expected {} values, got {}", grid.n + 1, values.len()));
        }
        if values[0] != 0.0 {
            return domain("paths start at 0");
        }
        Ok(Self { grid, values, kind })
    }

    /// Linear interpolation at `t` in `[0, 1]`.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.grid.n;
        let pos = t.clamp(0.0, 1.0) * n as f64;
        let i = (pos.floor() as usize).min(n - 1);
        let frac = pos - i as f64;
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    /// Doubles the resolution by inserting conditional Brownian midpoints.
    pub fn refine<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self> {
        let grid = PathGrid::new(self.grid.n * 2)?;
        let sd = (0.25 / self.grid.n as f64).sqrt();
        let mut values = Vec::with_capacity(grid.n + 1);
        for w in self.values.windows(2) {
            values.push(w[0]);
            let z: f64 = rng.sample(StandardNormal);
            values.push(0.5 * (w[0] + w[1]) + sd * z);
        }
        values.push(self.values[self.grid.n]);
        Ok(Self { grid, values, kind: self.kind })
    }

    /// Writes `s,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "s,value")?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.point(k), v)?;
        }
        Ok(())
    }
}

fn bm_values<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let sd = (1.0 / n as f64).sqrt();
    let mut values = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    values.push(acc);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        acc += sd * z;
        values.push(acc);
    }
    values
}

fn bridge_values<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut values = bm_values(n, rng);
    let end = values[n];
    for (k, v) in values.iter_mut().enumerate() {
        *v -= (k as f64 / n as f64) * end;
    }
    values[n] = 0.0;
    values
}

/// Standard Brownian motion: cumulative sum of `N(0, 1/n)` increments.
pub fn sample_bm<R: Rng + ?Sized>(grid: PathGrid, rng: &mut R) -> BrownianPath {
    BrownianPath { grid, values: bm_values(grid.n, rng), kind: PathKind::Free }
}

/// `B(s) = W(s) - s W(1)`.
pub fn sample_bridge<R: Rng + ?Sized>(grid: PathGrid, rng: &mut R) -> BrownianPath {
    BrownianPath { grid, values: bridge_values(grid.n, rng), kind: PathKind::Bridge }
}

/// Brownian meander: a Rayleigh endpoint `r`, then a three-dimensional
/// Bessel bridge from 0 to `r` built as the norm of a 3-d Brownian bridge
/// pinned at `(r, 0, 0)`.
pub fn sample_meander<R: Rng + ?Sized>(grid: PathGrid, rng: &mut R) -> BrownianPath {
    BrownianPath { grid, values: meander_values(grid.n, rng), kind: PathKind::Meander }
}

fn meander_values<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let r = (-2.0 * open_unit(rng).ln()).sqrt();
    let b1 = bridge_values(n, rng);
    let b2 = bridge_values(n, rng);
    let b3 = bridge_values(n, rng);
    (0..=n)
        .map(|k| {
            let drift = b1[k] + (k as f64 / n as f64) * r;
            (drift * drift + b2[k] * b2[k] + b3[k] * b3[k]).sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpliceInput {
    pub bridge: BrownianPath,
    pub meander: BrownianPath,
    /// +1 or -1.
    pub rademacher: i8,
    /// Where the bridge piece ends and the meander piece begins.
    pub split: f64,
}

/// Splices a bridge onto `[0, split]` and a signed meander onto
/// `[split, 1]`. A grid point equal to `split` takes the bridge value (0).
pub fn splice(input: &SpliceInput) -> Result<BrownianPath> {
    let SpliceInput { bridge, meander, rademacher, split } = input;
    check_open_unit("split", *split)?;
    if bridge.kind != PathKind::Bridge || meander.kind != PathKind::Meander {
        return domain("splice needs a bridge and a meander");
    }
    if bridge.grid != meander.grid {
        return domain("bridge and meander grids differ");
    }
    if rademacher.abs() != 1 {
        return domain(format!("rademacher sign must be +1 or -1, got {rademacher}"));
    }
    let grid = bridge.grid;
    let (left_scale, right_scale) = (split.sqrt(), (1.0 - split).sqrt() * f64::from(*rademacher));
    let values = (0..=grid.n)
        .map(|k| {
            let s = grid.point(k);
            if s <= *split {
                left_scale * bridge.at(s / split)
            } else {
                right_scale * meander.at((s - split) / (1.0 - split))
            }
        })
        .collect();
    Ok(BrownianPath { grid, values, kind: PathKind::Spliced })
}

/// Fraction of grid points `k = 1..=n` where the path is strictly positive.
pub fn occupation_time(path: &BrownianPath) -> f64 {
    let positive = path.values[1..].iter().filter(|&&v| v > 0.0).count();
    positive as f64 / path.grid.n as f64
}

/// Largest zero of the piecewise-linear interpolant: the last grid cell whose
/// endpoints straddle or touch zero, refined linearly. A path whose only zero
/// is the origin returns 0.
pub fn last_zero(path: &BrownianPath) -> f64 {
    let v = &path.values;
    let n = path.grid.n;
    for k in (0..n).rev() {
        let (a, b) = (v[k], v[k + 1]);
        if b == 0.0 {
            return path.grid.point(k + 1);
        }
        if a == 0.0 || (a < 0.0) != (b < 0.0) {
            let frac = a / (a - b);
            return (k as f64 + frac) / n as f64;
        }
    }
    0.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStep {
    pub path: BrownianPath,
    pub occupation: f64,
    pub rademacher: i8,
    /// Occupation time of the bridge before it was spliced in.
    pub bridge_occupation: f64,
}

/// One transition of the hidden chain. Draws, in order: bridge, meander,
/// sign.
///
/// The split is rounded to the nearest interior grid point `m / n`, and the
/// bridge and meander are sampled on `m` and `n - m` cells, so every grid
/// point of the result is a grid point of one of the pieces. The occupation
/// then decomposes exactly as `(m / n) occ(bridge) + [R = +1] (1 - m / n)`.
pub fn hidden_step<R: Rng + ?Sized>(prev_occupation: f64, grid: PathGrid, rng: &mut R) -> Result<HiddenStep> {
    check_open_unit("previous occupation", prev_occupation)?;
    let n = grid.n;
    let m = ((prev_occupation * n as f64).round() as usize).clamp(1, n - 1);
    let bridge = bridge_values(m, rng);
    let meander = meander_values(n - m, rng);
    let rademacher: i8 = if rng.random::<bool>() { 1 } else { -1 };
    let bridge_occupation = bridge[1..].iter().filter(|&&v| v > 0.0).count() as f64 / m as f64;
    let left = (m as f64 / n as f64).sqrt();
    let right = ((n - m) as f64 / n as f64).sqrt() * f64::from(rademacher);
    let mut values = Vec::with_capacity(n + 1);
    values.extend(bridge.iter().map(|v| left * v));
    values.extend(meander[1..].iter().map(|v| right * v));
    let path = BrownianPath { grid, values, kind: PathKind::Spliced };
    let occupation = occupation_time(&path);
    Ok(HiddenStep { path, occupation, rademacher, bridge_occupation })
}

/// Keeps a discrete occupation time inside the open interval. A grid path
/// can have no positive point (occupation 0) where the continuous path
/// would have a small positive one; such values move half a cell inward.
pub fn split_from_occupation(occupation: f64, grid: PathGrid) -> f64 {
    let half_cell = 0.5 / grid.n as f64;
    occupation.clamp(half_cell, 1.0 - half_cell)
}

/// Starts from free Brownian motion and applies `iterations` hidden steps,
/// each using the previous path's occupation time as the split.
pub fn run_hidden_chain<R: Rng + ?Sized>(grid: PathGrid, iterations: usize, rng: &mut R) -> Result<BrownianPath> {
    let mut path = sample_bm(grid, rng);
    for _ in 0..iterations {
        let split = split_from_occupation(occupation_time(&path), grid);
        path = hidden_step(split, grid, rng)?.path;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::arcsine_quantile;
    use crate::rng::{par_replicates, rng_from_seed};

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn grid_validation() {
        assert!(PathGrid::new(1).is_err());
        assert!(PathGrid::new(96).is_err());
        assert_eq!(PathGrid::new(8).unwrap().point(2), 0.25);
        assert_eq!(PathGrid::default().n(), 4096);
        assert_eq!(PathGrid::new(8).unwrap().nearest(0.3), 2);
    }

    #[test]
    fn path_constructor_checks_shape() {
        let g = PathGrid::new(4).unwrap();
        assert!(BrownianPath::new(g, vec![0.0; 4], PathKind::Free).is_err());
        assert!(BrownianPath::new(g, vec![1.0; 5], PathKind::Free).is_err());
        assert!(BrownianPath::new(g, vec![0.0; 5], PathKind::Free).is_ok());
    }

    #[test]
    fn bm_moments() {
        let g = PathGrid::new(256).unwrap();
        let paths = par_replicates(100_000, 1, |_, rng| {
            let p = sample_bm(g, rng);
            (p.values[0], p.values[64], p.values[128], p.values[256])
        });
        assert!(paths.iter().all(|p| p.0 == 0.0));
        let ends: Vec<f64> = paths.iter().map(|p| p.3).collect();
        let (_, var) = mean_var(&ends);
        assert!((var - 1.0).abs() < 0.02, "{var}");
        let cov = paths.iter().map(|p| p.1 * p.2).sum::<f64>() / paths.len() as f64;
        assert!((cov - 0.25).abs() < 0.02, "{cov}");
    }

    #[test]
    fn bridge_pins_and_variance() {
        let g = PathGrid::new(256).unwrap();
        let mids = par_replicates(100_000, 2, |_, rng| {
            let b = sample_bridge(g, rng);
            assert_eq!(b.values[256], 0.0);
            assert_eq!(b.values[0], 0.0);
            b.values[128]
        });
        let (_, var) = mean_var(&mids);
        assert!((var - 0.25).abs() < 0.01, "{var}");
    }

    #[test]
    fn meander_is_positive_with_rayleigh_mean() {
        let g = PathGrid::new(256).unwrap();
        let ends = par_replicates(50_000, 3, |_, rng| {
            let m = sample_meander(g, rng);
            assert_eq!(m.values[0], 0.0);
            assert!(m.values[1..].iter().all(|&v| v > 0.0));
            m.values[256]
        });
        let (mean, _) = mean_var(&ends);
        assert!((mean - (std::f64::consts::PI / 2.0).sqrt()).abs() < 0.02, "{mean}");
    }

    #[test]
    fn occupation_edge_cases() {
        let g = PathGrid::new(8).unwrap();
        let mut up = vec![1.0; 9];
        up[0] = 0.0;
        let up = BrownianPath::new(g, up, PathKind::Free).unwrap();
        assert_eq!(occupation_time(&up), 1.0);
        let down = BrownianPath::new(g, up.values.iter().map(|v| -v).collect(), PathKind::Free).unwrap();
        assert_eq!(occupation_time(&down), 0.0);
        // a zero is not positive
        let mut flat = vec![0.0; 9];
        flat[3] = 2.0;
        let flat = BrownianPath::new(g, flat, PathKind::Free).unwrap();
        assert_eq!(occupation_time(&flat), 1.0 / 8.0);
    }

    #[test]
    fn meander_occupation_is_one() {
        let g = PathGrid::new(512).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..20 {
            let m = sample_meander(g, &mut rng);
            assert_eq!(occupation_time(&m), 1.0);
            let neg = BrownianPath::new(g, m.values.iter().map(|v| -v).collect(), PathKind::Free).unwrap();
            assert_eq!(occupation_time(&neg), 0.0);
        }
    }

    #[test]
    fn last_zero_cases() {
        let g = PathGrid::new(4).unwrap();
        let p = BrownianPath::new(g, vec![0.0, 1.0, -1.0, 2.0, 2.0], PathKind::Free).unwrap();
        // crossing between s = 0.5 and 0.75 at a third of the cell
        assert!((last_zero(&p) - (2.0 + 1.0 / 3.0) / 4.0).abs() < 1e-15);
        let p = BrownianPath::new(g, vec![0.0, 1.0, 2.0, 1.0, 3.0], PathKind::Free).unwrap();
        assert_eq!(last_zero(&p), 0.0);
        let p = BrownianPath::new(g, vec![0.0, 1.0, 0.0, 1.0, 3.0], PathKind::Free).unwrap();
        assert_eq!(last_zero(&p), 0.5);

        let mut rng = rng_from_seed(5);
        let b = sample_bridge(PathGrid::new(64).unwrap(), &mut rng);
        assert_eq!(last_zero(&b), 1.0);
    }

    fn spliced(split: f64, sign: i8, seed: u64) -> BrownianPath {
        let g = PathGrid::new(1024).unwrap();
        let mut rng = rng_from_seed(seed);
        let bridge = sample_bridge(g, &mut rng);
        let meander = sample_meander(g, &mut rng);
        splice(&SpliceInput { bridge, meander, rademacher: sign, split }).unwrap()
    }

    #[test]
    fn splice_sign_and_zero() {
        let out = spliced(0.5, 1, 6);
        assert_eq!(out.kind, PathKind::Spliced);
        assert!(out.values[513..].iter().all(|&v| v > 0.0));
        // 0.5 is a grid point, where the bridge contributes exactly 0
        assert_eq!(out.values[512], 0.0);
        assert_eq!(last_zero(&out), 0.5);
        let out = spliced(0.5, -1, 6);
        assert!(out.values[513..].iter().all(|&v| v < 0.0));
    }

    #[test]
    fn splice_last_zero_off_grid() {
        // Off the grid the junction cell only changes sign when the last
        // bridge value and the meander sign disagree; otherwise the detected
        // zero is the bridge's previous crossing, some cells earlier.
        let n = 1024.0;
        let mut errs = Vec::new();
        for seed in 0..400 {
            let split = 0.1 + 0.8 * (seed as f64 / 400.0) + 0.3 / n;
            let out = spliced(split, if seed % 2 == 0 { 1 } else { -1 }, 100 + seed);
            let z = last_zero(&out);
            assert!(z <= split + 1.0 / n);
            errs.push((split - z).abs());
        }
        errs.sort_by(f64::total_cmp);
        assert!(errs[errs.len() / 2] <= 1.0 / n, "median {}", errs[errs.len() / 2] * n);
    }

    #[test]
    fn splice_rejects_bad_input() {
        let g = PathGrid::new(16).unwrap();
        let mut rng = rng_from_seed(7);
        let bridge = sample_bridge(g, &mut rng);
        let meander = sample_meander(g, &mut rng);
        let mut input = SpliceInput { bridge: bridge.clone(), meander: meander.clone(), rademacher: 1, split: 1.0 };
        assert!(splice(&input).is_err());
        input.split = 0.4;
        input.rademacher = 0;
        assert!(splice(&input).is_err());
        input.rademacher = 1;
        input.meander = bridge;
        assert!(splice(&input).is_err());
    }

    #[test]
    fn hidden_step_decomposition() {
        let g = PathGrid::new(4096).unwrap();
        let n = g.n() as f64;
        let errs = par_replicates(400, 8, |i, rng| {
            let prev = 0.05 + 0.9 * (i as f64 / 400.0);
            let st = hidden_step(prev, g, rng).unwrap();
            let m = (prev * n).round();
            assert_eq!(last_zero(&st.path), m / n);
            let predicted = prev * st.bridge_occupation + f64::from(st.rademacher + 1) / 2.0 * (1.0 - prev);
            (st.occupation - predicted).abs()
        });
        // prev is rounded to the grid, which moves it by at most half a cell
        assert!(errs.iter().all(|&e| e <= 2.0 / n), "max err {} cells", errs.iter().cloned().fold(0.0, f64::max) * n);
        let mut rng = rng_from_seed(9);
        assert!(hidden_step(0.0, g, &mut rng).is_err());
    }

    #[test]
    fn split_stays_open() {
        let g = PathGrid::new(16).unwrap();
        assert_eq!(split_from_occupation(0.0, g), 1.0 / 32.0);
        assert_eq!(split_from_occupation(1.0, g), 1.0 - 1.0 / 32.0);
        assert_eq!(split_from_occupation(0.25, g), 0.25);
    }

    #[test]
    fn spliced_covariance_is_brownian() {
        let g = PathGrid::new(1024).unwrap();
        let (i1, i2) = (g.nearest(0.25), g.nearest(0.75));
        let pairs = par_replicates(20_000, 10, |_, rng| {
            let split = arcsine_quantile(open_unit(rng)).unwrap().clamp(1e-9, 1.0 - 1e-9);
            let bridge = sample_bridge(g, rng);
            let meander = sample_meander(g, rng);
            let rademacher = if rng.random::<bool>() { 1 } else { -1 };
            let w = splice(&SpliceInput { bridge, meander, rademacher, split }).unwrap();
            (w.values[i1], w.values[i2])
        });
        let prods: Vec<f64> = pairs.iter().map(|(a, b)| a * b).collect();
        let (cov, var) = mean_var(&prods);
        let se = (var / prods.len() as f64).sqrt();
        assert!((cov - 0.25).abs() < 3.0 * se, "cov {cov} se {se}");
    }

    #[test]
    fn refinement_moves_occupation_little() {
        let g = PathGrid::new(1024).unwrap();
        let diffs = par_replicates(4000, 11, |_, rng| {
            let p = sample_bm(g, rng);
            let r = p.refine(rng).unwrap();
            assert_eq!(r.grid.n(), 2048);
            assert_eq!(r.values[2048], p.values[1024]);
            occupation_time(&r) - occupation_time(&p)
        });
        let (bias, _) = crate::stats::mean_and_se(&diffs);
        assert!(bias.abs() <= 1.0 / 1024.0, "bias {}", bias * 1024.0);
        // per-path changes come from the ~sqrt(n) sign changes and are a
        // little over one cell on average
        let mean_abs = diffs.iter().map(|d| d.abs()).sum::<f64>() / diffs.len() as f64;
        assert!(mean_abs <= 2.0 / 1024.0, "mean |diff| {}", mean_abs * 1024.0);
    }

    #[test]
    fn csv_dump() {
        let g = PathGrid::new(2).unwrap();
        let p = BrownianPath::new(g, vec![0.0, 0.5, -1.0], PathKind::Free).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s,value\n0,0\n0.5,0.5\n1,-1\n");
    }
}
