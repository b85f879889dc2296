//! Regularization convergence: uniform deviation of the glued integrand,
//! the vanishing `eps L_p` energy, and the forcing-truncation tail, each
//! checked to decrease along its sweep.

use crate::config::ExperimentConfig;
use crate::csvio::Csv;
use crate::{CliError, CliResult};
use pqlab_core::grid::{BallRegion, Grid, ScalarField};
use pqlab_core::integrand::{truncate_forcing, ModelIntegrand, PQParams, RegularizedIntegrand};
use pqlab_core::solver::{energy_convergence_study, Region};

/// `sup_{|z| <= T} |Ftilde_eps - F|`, sampled radially (both integrands
/// are radial).
pub fn sup_deviation(base: ModelIntegrand, eps: f64, t_cut: f64, samples: usize) -> CliResult<f64> {
    let reg = RegularizedIntegrand::new(base, eps, t_cut)?;
    let mut worst = 0.0f64;
    for i in 0..=samples {
        let r = t_cut * i as f64 / samples as f64;
        let z = [r, 0.0];
        worst = worst.max((reg.eval_tilde_f(&z) - base.eval_f(&z)).abs());
    }
    Ok(worst)
}

/// `|| f - f_m ||_{L^n(B_1)}` for the truncation level `m`.
fn truncation_tail(f: &ScalarField, m: f64, unit: &BallRegion) -> CliResult<f64> {
    let fm = truncate_forcing(f, m)?;
    let n = f.grid().dim() as f64;
    let diff = ScalarField::new(
        f.grid().clone(),
        f.values()
            .iter()
            .zip(fm.values())
            .map(|(a, b)| (a - b).abs().powf(n))
            .collect(),
    )?;
    Ok(diff.integrate_ball(unit)?.powf(1.0 / n))
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Csv> {
    cfg.validate()?;
    if cfg.eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CliError::Config("eps_list must be strictly decreasing".into()));
    }
    if cfg.m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("m_list must be strictly increasing".into()));
    }
    let params = PQParams::new(cfg.nu, cfg.nu.max(cfg.lambda_list[0]), cfg.p, cfg.q, cfg.mu)?;
    let base = ModelIntegrand::new(params, cfg.cp, cfg.cq)?;
    let grid = Grid::new(2, cfg.radius.max(1.0), cfg.h.max(1.0 / 16.0))?;
    let unit = BallRegion::centered(2, 1.0)?;
    // tall central spike so the truncation column is non-trivial
    let amp = cfg.f_amp.max(*cfg.m_list.last().unwrap());
    let f = ScalarField::from_fn(grid.clone(), |x| {
        let r2: f64 = x.iter().map(|xi| xi * xi).sum();
        amp * (-r2 / 0.05).exp()
    })?;
    let boundary = ScalarField::from_fn(grid.clone(), |x| 0.4 * x[0] - 0.2 * x[1])?;
    let rows = energy_convergence_study(
        base,
        cfg.t_cut,
        &f,
        &boundary,
        &Region::Ball(unit.clone()),
        &cfg.eps_list,
        cfg.tol.max(1e-9),
    )?;
    let mut sups = vec![];
    for &eps in &cfg.eps_list {
        sups.push(sup_deviation(base, eps, cfg.t_cut, 400)?);
    }
    let mut tails = vec![];
    for &m in &cfg.m_list {
        tails.push(truncation_tail(&f, m, &unit)?);
    }
    let mut csv = Csv::new(&["eps", "m", "sup_dev", "eps_lp", "tilde_energy", "trunc_ln"]);
    for ((row, sup), &eps) in rows.iter().zip(&sups).zip(&cfg.eps_list) {
        for (&m, &tail) in cfg.m_list.iter().zip(&tails) {
            csv.push(vec![eps, m, *sup, row.eps_lp, row.tilde_energy, tail]);
        }
    }
    // soundness: every column decreases along its own sweep
    let slack = |a: f64| 1e-12 * (a.abs() + 1.0);
    for (name, seq) in [("sup_dev", &sups), ("trunc_ln", &tails)] {
        if seq.windows(2).any(|w| w[1] > w[0] + slack(w[0])) {
            return Err(CliError::Soundness(format!(
                "{name} column fails to decrease: {seq:?}"
            )));
        }
    }
    let eps_lp: Vec<f64> = rows.iter().map(|r| r.eps_lp).collect();
    if eps_lp.windows(2).any(|w| w[1] > w[0] + slack(w[0])) {
        return Err(CliError::Soundness(format!(
            "eps_lp column fails to decrease: {eps_lp:?}"
        )));
    }
    Ok(csv)
}
