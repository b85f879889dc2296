//! Counterexample optimality: the profile `v = x_n^2 + 1 - Lambda |x'|^2`
//! is a subsolution whose sup / L2 ratio grows like `Lambda^{(n-1)/4}`.
//!
//! All integrals reduce to the half-plane `(r, x_n)`, `r = |x'|`, with
//! weight `(n-1) omega_{n-1} r^{n-2}`, so any dimension is cheap.

use crate::config::ExperimentConfig;
use crate::csvio::Csv;
use crate::experiments::{counterexample_field, fit_slope, run_sweep};
use crate::{CliError, CliResult};
use pqlab_core::degiorgi::ball_volume;
use pqlab_core::grid::Grid;

fn profile(lambda: f64, r: f64, xn: f64) -> f64 {
    xn * xn + 1.0 - lambda * r * r
}

/// One midpoint-rule evaluation of `sup_{B_{1/4}} v_+ / (fint_{B_1} v_+^2)^{1/2}`
/// with `m` cells across the unit radius.
fn ratio_once(n: usize, lambda: f64, m: usize) -> f64 {
    let dr = 1.0 / m as f64;
    let weight = (n as f64 - 1.0) * ball_volume(n - 1);
    let mut mass = 0.0;
    for i in 0..m {
        let r = (i as f64 + 0.5) * dr;
        let ring = weight * r.powi(n as i32 - 2) * dr * dr;
        for j in 0..2 * m {
            let xn = -1.0 + (j as f64 + 0.5) * dr;
            if r * r + xn * xn <= 1.0 {
                let v = profile(lambda, r, xn).max(0.0);
                mass += ring * v * v;
            }
        }
    }
    let mean = mass / ball_volume(n);
    // sup over B_{1/4} on the reduced domain (v decreasing in r: scan
    // anyway, the mesh is cheap)
    let quarter = 0.25 / m as f64;
    let mut sup = 0.0f64;
    for i in 0..=m {
        let r = i as f64 * quarter;
        for j in 0..=2 * m {
            let xn = -0.25 + j as f64 * quarter;
            if r * r + xn * xn <= 0.0625 + 1e-15 {
                sup = sup.max(profile(lambda, r, xn));
            }
        }
    }
    sup.max(0.0) / mean.sqrt()
}

/// Compute the ratio with internal resolution doubling until two
/// consecutive refinements agree within 0.1%.
pub fn counterexample_ratio(n: usize, lambda: f64, m0: usize) -> CliResult<f64> {
    if n < 3 || lambda < 1.0 {
        return Err(CliError::Config(format!(
            "counterexample needs n >= 3 and Lambda >= 1, got n = {n}, Lambda = {lambda}"
        )));
    }
    let mut m = m0.max(16);
    let mut prev = ratio_once(n, lambda, m);
    loop {
        m *= 2;
        let next = ratio_once(n, lambda, m);
        if (next - prev).abs() <= 1e-3 * next.abs() {
            return Ok(next);
        }
        if m >= 1 << 14 {
            return Err(CliError::Config(format!(
                "quadrature did not stabilize to 0.1% by m = {m} \
                 (last two: {prev}, {next})"
            )));
        }
        prev = next;
    }
}

/// Sweep the configured contrast list, fitting the log-log slope.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Csv> {
    cfg.validate()?;
    let ratios = run_sweep(&cfg.lambda_list, cfg.threads, |&lambda| {
        counterexample_ratio(cfg.n, lambda, 128)
    })?;
    let xs: Vec<f64> = cfg.lambda_list.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
    let slope = if ratios.len() >= 2 {
        fit_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    let mut csv = Csv::new(&["lambda", "ratio", "log_lambda", "log_ratio", "fitted_slope"]);
    for ((lambda, ratio), (x, y)) in cfg.lambda_list.iter().zip(&ratios).zip(xs.iter().zip(&ys)) {
        csv.push(vec![*lambda, *ratio, *x, *y, slope]);
    }
    Ok(csv)
}

/// Discrete residual `max | -sum_d a_dd D^2_d v |` of the profile against
/// `a = diag(1, ..., 1, (n-1)(1+perturb) Lambda)` on a grid; central
/// differences are exact on quadratics, so the unperturbed residual is
/// machine zero.
pub fn pde_check(n: usize, lambda: f64, h: f64, perturb: f64) -> CliResult<f64> {
    let grid = Grid::new(n, 1.0, h)?;
    let v = counterexample_field(&grid, lambda)?;
    let mut diag = vec![1.0; n];
    diag[n - 1] = (n as f64 - 1.0) * lambda * (1.0 + perturb);
    let m = grid.nodes_per_axis();
    let mut strides = vec![1usize; n];
    for d in (0..n - 1).rev() {
        strides[d] = strides[d + 1] * m;
    }
    let vals = v.values();
    let mut worst = 0.0f64;
    let mut it = grid.nodes();
    while let Some((flat, multi, _)) = it.advance() {
        if multi.iter().any(|&i| i == 0 || i == m - 1) {
            continue;
        }
        let mut res = 0.0;
        for d in 0..n {
            res -= diag[d] * (vals[flat + strides[d]] - 2.0 * vals[flat] + vals[flat - strides[d]])
                / (h * h);
        }
        worst = worst.max(res.abs());
    }
    Ok(worst)
}
