//! The individual studies driven by the `pqlab` subcommands.

pub mod contrast;
pub mod counterexample;
pub mod degiorgi_run;
pub mod lipschitz;
pub mod lorentz;
pub mod regularize;

use crate::CliResult;
use pqlab_core::grid::{Grid, ScalarField};

/// The anisotropic profile `v = x_n^2 + 1 - Lambda |x'|^2` sampled on a
/// grid.
pub fn counterexample_field(grid: &Grid, lambda: f64) -> CliResult<ScalarField> {
    let n = grid.dim();
    Ok(ScalarField::from_fn(grid.clone(), move |x| {
        let xn = x[n - 1];
        let rp2: f64 = x[..n - 1].iter().map(|v| v * v).sum();
        xn * xn + 1.0 - lambda * rp2
    })?)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Run one closure per sweep entry, optionally on a rayon pool; results
/// come back in input order either way, so `threads = 1` is the bitwise
/// reference mode.
pub fn run_sweep<T, R, F>(items: &[T], threads: usize, f: F) -> CliResult<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> CliResult<R> + Sync,
{
    if threads <= 1 {
        items.iter().map(&f).collect()
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::CliError::Config(e.to_string()))?;
        pool.install(|| items.par_iter().map(&f).collect())
    }
}
