//! Fixed workloads shared by the benchmarks.

use arcwalk::rng::open_unit;
use arcwalk::rng_from_seed;

/// `n` pseudo-random points of `(0, 1)^2`, fixed by `seed`.
pub fn unit_pairs(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| (open_unit(&mut rng), open_unit(&mut rng))).collect()
}

/// `a = k / (n + 1)` for `k = 1..=n`.
pub fn interior_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}
