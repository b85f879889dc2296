//! Lipschitz-estimate study: measure the gradient sup of a minimizer and
//! compare against the three-term right side
//! `S^{1/p} + S^{alpha_n} + ||f||_{n,1}^{beta_n}`,
//! `S = fint_B F(grad u) + ||f||_{n,1}^{p/(p-1)}`,
//! with unit constant. The absolute ratio is not predicted (the constant
//! is existential); its stability across grids is.

use crate::config::ExperimentConfig;
use crate::csvio::Csv;
use crate::{CliError, CliResult};
use pqlab_core::degiorgi::{ball_volume, theorem_exponents};
use pqlab_core::grid::{BallRegion, Grid, ScalarField};
use pqlab_core::integrand::{ModelIntegrand, PQParams, RegularizedIntegrand};
use pqlab_core::rearrangement::{lorentz_n1, rearrange, WeightedSamples};
use pqlab_core::solver::{minimize, MinimizationProblem, Region};

/// One grid's worth of measurements for a `(p, q)` configuration.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzRow {
    pub h: f64,
    pub grad_sup: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// Forcing sample in `L^{n,1}`: a smooth Gaussian bump.
pub fn forcing_bump(grid: &Grid, amp: f64) -> CliResult<ScalarField> {
    Ok(ScalarField::from_fn(grid.clone(), move |x| {
        let r2: f64 = x.iter().map(|xi| xi * xi).sum();
        amp * (-r2 / 0.18).exp()
    })?)
}

/// Mildly anisotropic affine-plus-curvature boundary data.
fn boundary_data(grid: &Grid) -> CliResult<ScalarField> {
    let n = grid.dim();
    Ok(ScalarField::from_fn(grid.clone(), move |x| {
        let mut s = 0.0;
        for (d, xi) in x.iter().enumerate() {
            s += (0.5 - 0.2 * d as f64) * xi;
        }
        s + 0.3 * x[0] * x[n - 1]
    })?)
}

/// Solve one configuration on one grid and evaluate both sides.
pub fn study_once(cfg: &ExperimentConfig, h: f64) -> CliResult<LipschitzRow> {
    let exps = theorem_exponents(cfg.n, cfg.p, cfg.q, cfg.kappa)?;
    if !exps.admissible() {
        return Err(CliError::Config(format!(
            "(p, q) = ({}, {}) inadmissible at n = {}, kappa = {}",
            cfg.p, cfg.q, cfg.n, cfg.kappa
        )));
    }
    let grid = Grid::new(cfg.n, cfg.radius, h)?;
    let params = PQParams::new(cfg.nu, cfg.lambda_list[cfg.lambda_list.len() - 1].max(cfg.nu), cfg.p, cfg.q, cfg.mu)?;
    let base = ModelIntegrand::new(params, cfg.cp, cfg.cq)?;
    let reg = RegularizedIntegrand::new(base, cfg.eps, cfg.t_cut)?;
    let f = forcing_bump(&grid, cfg.f_amp)?;
    let boundary = boundary_data(&grid)?;
    let unit = BallRegion::centered(cfg.n, 1.0)?;
    let problem = MinimizationProblem {
        integrand: &reg,
        forcing: &f,
        boundary: &boundary,
        region: Region::Ball(unit.clone()),
    };
    let (u, _) = minimize(&problem, cfg.tol)?;
    let half = BallRegion::centered(cfg.n, 0.5)?;
    let grad2 = u.gradient()?.magnitude_squared();
    let grad_sup = grad2.sup_ball(&half)?.sqrt();
    // fint_B F(grad u): base integrand, cell-averaged via central gradients
    let energy_density = grad2.map(|g2| base.radial_f(g2.sqrt()));
    let mean_energy = energy_density.integrate_ball(&unit)? / ball_volume(cfg.n);
    let lorentz = lorentz_n1(
        &rearrange(&WeightedSamples::from_field(&f, &unit)?),
        cfg.n,
    );
    let s = mean_energy + lorentz.powf(cfg.p / (cfg.p - 1.0));
    let rhs = s.powf(1.0 / cfg.p) + s.powf(exps.alpha_n) + lorentz.powf(exps.beta_n);
    Ok(LipschitzRow {
        h,
        grad_sup,
        rhs,
        ratio: grad_sup / rhs,
    })
}

/// Run the configured `(p, q)` pair on two grids (`h` and the next finer
/// grid with two more cells per unit) and report the ratio drift.
pub fn run(cfg: &ExperimentConfig) -> CliResult<Csv> {
    cfg.validate()?;
    let coarse = study_once(cfg, cfg.h)?;
    // next finer admissible spacing: keep 2R/h an even integer
    let cells = (2.0 * cfg.radius / cfg.h).round() as usize;
    let fine_h = 2.0 * cfg.radius / (cells + 2) as f64;
    let fine = study_once(cfg, fine_h)?;
    let drift = (coarse.ratio - fine.ratio).abs() / fine.ratio;
    let mut csv = Csv::new(&["p", "q", "h", "grad_sup", "rhs", "ratio", "drift"]);
    for row in [coarse, fine] {
        csv.push(vec![
            cfg.p,
            cfg.q,
            row.h,
            row.grad_sup,
            row.rhs,
            row.ratio,
            drift,
        ]);
    }
    Ok(csv)
}
