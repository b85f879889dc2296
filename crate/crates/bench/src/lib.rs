//! Shared fixtures for the criterion benchmarks.

use pqlab_core::grid::{Grid, ScalarField};

/// The anisotropic benchmark profile `v = x_n^2 + 1 - Lambda |x'|^2`.
pub fn counterexample_field(grid: &Grid, lambda: f64) -> ScalarField {
    let n = grid.dim();
    ScalarField::from_fn(grid.clone(), move |x| {
        let xn = x[n - 1];
        let rp2: f64 = x[..n - 1].iter().map(|v| v * v).sum();
        xn * xn + 1.0 - lambda * rp2
    })
    .expect("valid grid")
}

/// Deterministic pseudo-random sample pairs for rearrangement benchmarks.
pub fn sample_pairs(count: usize) -> Vec<(f64, f64)> {
    let mut state = 0x9e3779b97f4a7c15u64;
    (0..count)
        .map(|_| {
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            (0.1 + 5.0 * next(), 0.01 + next())
        })
        .collect()
}
