//! End-to-end iteration study: estimate Caccioppoli constants on a
//! subsolution, run the level-set iteration, and compare the emitted
//! bound against the grid supremum.

use crate::config::ExperimentConfig;
use crate::csvio::Csv;
use crate::experiments::{counterexample_field, run_sweep};
use crate::{CliError, CliResult};
use pqlab_core::degiorgi::{
    c1_from_sphere_constant, c2_default, estimate_sphere_sobolev_constant, run_iteration,
    two_star, zonal_profile_library, IterationConstants, IterationTrace,
};
use pqlab_core::grid::{BallRegion, Grid, ScalarField};
use pqlab_core::solver::{estimate_caccioppoli_constants, radial_tent};

/// One full pipeline run for a single contrast value.
#[derive(Debug)]
pub struct PipelineResult {
    pub constants: IterationConstants,
    pub trace: IterationTrace,
    pub grid_sup: f64,
    pub sound: bool,
}

/// Radial tents between 0.35 and 1 used as Caccioppoli test cutoffs.
fn tent_library(grid: &Grid) -> CliResult<Vec<ScalarField>> {
    let mut cutoffs = vec![];
    for i in 0..4 {
        let rho = 0.35 + 0.08 * i as f64;
        for j in 1..4 {
            let sigma = rho + 0.12 + 0.12 * j as f64;
            if sigma <= 1.0 && sigma - rho >= 2.0 * grid.spacing() {
                cutoffs.push(radial_tent(grid, rho, sigma)?);
            }
        }
    }
    if cutoffs.is_empty() {
        return Err(CliError::Config(format!(
            "grid spacing {} too coarse for the cutoff library",
            grid.spacing()
        )));
    }
    Ok(cutoffs)
}

/// Run the pipeline for `v` and `f` on a grid covering `B_1`.
pub fn pipeline(
    v: &ScalarField,
    f: &ScalarField,
    kappa: f64,
    k0: f64,
) -> CliResult<PipelineResult> {
    let grid = v.grid();
    let n = grid.dim();
    let unit = BallRegion::centered(n, 1.0)?;
    let half = BallRegion::centered(n, 0.5)?;
    let c_m = (4.0 * (n as f64 - 1.0)).sqrt();
    let sup_plus = v.map(|t| t.max(0.0)).sup_ball(&unit)?;
    let levels: Vec<f64> = (0..5).map(|i| k0 + i as f64 * 0.25 * sup_plus).collect();
    let cutoffs = tent_library(grid)?;
    let est = estimate_caccioppoli_constants(v, f, &levels, c_m, &cutoffs)?;
    let ts = two_star(n, kappa)?;
    let c_obs = estimate_sphere_sobolev_constant(grid, ts, 0.75, &zonal_profile_library())?;
    let constants = IterationConstants::new(
        n,
        kappa,
        c1_from_sphere_constant(c_obs, ts),
        c2_default(n)?,
        c_m,
        est.m1.max(1.0),
        est.m2,
        k0,
    )?;
    let trace = run_iteration(v, f, &constants, 200)?;
    let grid_sup = v.map(|t| t.max(0.0)).sup_ball(&half)?;
    let sound = match trace.bound {
        Some(b) => b >= grid_sup * (1.0 - 1e-12),
        None => false,
    };
    Ok(PipelineResult {
        constants,
        trace,
        grid_sup,
        sound,
    })
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Csv> {
    cfg.validate()?;
    if cfg.radius < 1.0 {
        return Err(CliError::Config(format!(
            "iteration study needs a grid covering B_1, radius = {}",
            cfg.radius
        )));
    }
    let results = run_sweep(&cfg.lambda_list, cfg.threads, |&lambda| {
        let grid = Grid::new(cfg.n, cfg.radius, cfg.h)?;
        let v = counterexample_field(&grid, lambda)?;
        let f = ScalarField::constant(grid, cfg.f_const)?;
        pipeline(&v, &f, cfg.kappa, cfg.k0)
    })?;
    let mut csv = Csv::new(&[
        "lambda", "c1", "c2", "m1", "m2", "j0", "bound", "grid_sup", "bound_over_sup", "steps",
        "sound",
    ]);
    let mut violation = None;
    for (lambda, res) in cfg.lambda_list.iter().zip(&results) {
        let bound = res.trace.bound.unwrap_or(f64::INFINITY);
        if !res.sound {
            violation = Some((*lambda, bound, res.grid_sup));
        }
        csv.push(vec![
            *lambda,
            res.constants.c1,
            res.constants.c2,
            res.constants.m1,
            res.constants.m2,
            res.trace.j0,
            bound,
            res.grid_sup,
            bound / res.grid_sup.max(f64::MIN_POSITIVE),
            res.trace.rows.len() as f64,
            res.sound as u8 as f64,
        ]);
    }
    if let Some((lambda, bound, sup)) = violation {
        return Err(CliError::Soundness(format!(
            "Lambda = {lambda}: iteration bound {bound} below grid sup {sup}"
        )));
    }
    Ok(csv)
}

/// CSV trace of one iteration run, one row per level step.
pub fn trace_csv(trace: &IterationTrace) -> Csv {
    let mut csv = Csv::new(&[
        "ell", "k", "sigma", "delta1", "delta2", "delta3", "j", "target", "pass",
    ]);
    for row in &trace.rows {
        csv.push(vec![
            row.ell as f64,
            row.k,
            row.sigma,
            row.d1,
            row.d2,
            row.d3,
            row.j,
            row.target,
            row.pass as u8 as f64,
        ]);
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_gives_k0() {
        let grid = Grid::new(3, 1.0, 0.125).unwrap();
        let v = ScalarField::constant(grid.clone(), 0.0).unwrap();
        let f = ScalarField::constant(grid, 0.0).unwrap();
        let res = pipeline(&v, &f, 0.25, 0.75).unwrap();
        assert_eq!(res.trace.bound, Some(0.75));
        assert!(res.sound);
    }

    #[test]
    fn counterexample_is_sound_end_to_end() {
        let mut cfg = ExperimentConfig::default();
        cfg.lambda_list = vec![10.0];
        cfg.h = 1.0 / 12.0;
        let csv = run(&cfg).unwrap();
        let row = &csv.rows()[0];
        let bound = csv.column("bound").unwrap()[0];
        let sup = csv.column("grid_sup").unwrap()[0];
        assert!(bound.is_finite() && bound >= sup, "row {row:?}");
    }

    #[test]
    fn constant_forcing_raises_the_bound() {
        // with the constants held fixed, a positive forcing enters only
        // through the second level increment and can only raise the bound
        let grid = Grid::new(3, 1.0, 1.0 / 10.0).unwrap();
        let v = counterexample_field(&grid, 10.0).unwrap();
        let f0 = ScalarField::constant(grid.clone(), 0.0).unwrap();
        let f1 = ScalarField::constant(grid, 3.0).unwrap();
        let k = IterationConstants::new(
            3,
            0.25,
            2.0,
            1.5,
            8.0f64.sqrt(),
            10.0f64.sqrt(),
            1.5,
            0.0,
        )
        .unwrap();
        let without = run_iteration(&v, &f0, &k, 200).unwrap();
        let with = run_iteration(&v, &f1, &k, 200).unwrap();
        assert!(with.bound.unwrap() > without.bound.unwrap());
    }

    #[test]
    fn trace_csv_has_one_row_per_step() {
        let grid = Grid::new(3, 1.0, 1.0 / 10.0).unwrap();
        let v = counterexample_field(&grid, 10.0).unwrap();
        let f = ScalarField::constant(grid, 0.0).unwrap();
        let res = pipeline(&v, &f, 0.25, 0.0).unwrap();
        let csv = trace_csv(&res.trace);
        assert_eq!(csv.rows().len(), res.trace.rows.len());
        assert!(!csv.rows().is_empty());
    }
}
