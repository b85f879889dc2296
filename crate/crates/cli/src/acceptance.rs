//! The acceptance suite: ten end-to-end checks of the laboratory,
//! runnable through `pqlab check` or the integration test harness.
//! Each check returns a one-line pass/fail verdict with detail.

use crate::config::ExperimentConfig;
use crate::experiments::{counterexample, fit_slope, lipschitz};
use pqlab_core::degiorgi::{
    c1_from_sphere_constant, c2_default, estimate_sphere_sobolev_constant, optimal_cutoff_radial,
    run_iteration, tau, theorem_exponents, two_star, zonal_profile_library, IterationConstants,
};
use pqlab_core::grid::{BallRegion, Grid, ScalarField};
use pqlab_core::integrand::{GrowthEnvelope, ModelIntegrand, PQParams, RegularizedIntegrand};
use pqlab_core::rearrangement::{
    lorentz_n1, lp_norm_from_profile, omega, omega_inverse, rearrange, WeightedSamples,
};
use pqlab_core::solver::{
    estimate_caccioppoli_constants, minimize, radial_tent, solve_linear, EllipticCoefficients,
    MinimizationProblem, Region,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct Criterion {
    pub index: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "criterion {:2} [{}] {} — {} ({:.1}s)",
            self.index,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn finish(
    index: usize,
    name: &'static str,
    start: Instant,
    result: Result<(bool, String), String>,
) -> Criterion {
    let (pass, detail) = match result {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Criterion {
        index,
        name,
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// 1: sup/L2 ratio of the anisotropic profile scales like
/// `Lambda^{(n-1)/4}` in the slope-fit sense for n = 4, 5, 7.
pub fn criterion_1() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let lambdas = [1e2, 1e3, 1e4, 1e5];
        let xs: Vec<f64> = lambdas.iter().map(|l: &f64| l.ln()).collect();
        let mut detail = String::new();
        let mut pass = true;
        for (n, lo, hi) in [(4, 0.70, 0.80), (5, 0.95, 1.05), (7, 1.45, 1.55)] {
            let mut ys = vec![];
            for &l in &lambdas {
                ys.push(
                    counterexample::counterexample_ratio(n, l, 128)
                        .map_err(|e| e.to_string())?
                        .ln(),
                );
            }
            let slope = fit_slope(&xs, &ys);
            pass &= (lo..=hi).contains(&slope);
            detail.push_str(&format!("n={n}: slope {slope:.4} (want [{lo}, {hi}]); "));
        }
        Ok((pass, detail))
    })();
    finish(1, "counterexample optimality slopes", start, result)
}

/// 2: central-difference residual of the profile is machine zero.
pub fn criterion_2() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let mut pass = true;
        let mut detail = String::new();
        for n in [3usize, 4] {
            for lambda in [10.0, 1e3] {
                let res = counterexample::pde_check(n, lambda, 0.125, 0.0)
                    .map_err(|e| e.to_string())?;
                pass &= res <= 1e-10 * lambda;
                detail.push_str(&format!("n={n} L={lambda:.0e}: {res:.2e}; "));
            }
        }
        Ok((pass, detail))
    })();
    finish(2, "PDE exactness of the counterexample", start, result)
}

/// 3: tau defining relation and the alpha_n/beta_n identities.
pub fn criterion_3() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let mut worst_tau = 0.0f64;
        for n in 3..=8 {
            for kappa in [0.05, 0.25, 0.45] {
                let ts = two_star(n, kappa).map_err(|e| e.to_string())?;
                let alpha = 0.5 + ts / 4.0;
                let t = tau(n, kappa).map_err(|e| e.to_string())?;
                worst_tau =
                    worst_tau.max(((2.0 * t).powf(ts / 2.0 - 1.0) * 2.0f64.powf(alpha) - 1.0).abs());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut worst_id = 0.0f64;
        let mut count = 0;
        while count < 200 {
            let n = rng.gen_range(4usize..=8);
            let p = rng.gen_range(1.2f64..4.0);
            let nf = n as f64;
            let cap = 1.0 + (2.0 / (nf - 1.0)).min(4.0 * (p - 1.0) / (p * (nf - 3.0)));
            let q = p * rng.gen_range(1.0f64..cap);
            let kappa = rng.gen_range(0.01f64..0.49);
            let e = theorem_exponents(n, p, q, kappa).map_err(|e| e.to_string())?;
            if !(e.gamma < 1.0 && e.gamma_tilde < 1.0) {
                continue;
            }
            worst_id = worst_id.max((e.alpha_n * 2.0 * p * (1.0 - e.gamma) - 1.0).abs());
            worst_id = worst_id.max((e.beta_n * p * (1.0 - e.gamma_tilde) - 1.0).abs());
            count += 1;
        }
        let mut remark_ok = true;
        for _ in 0..200 {
            let p = rng.gen_range(1.2f64..4.0);
            let q = p * rng.gen_range(1.0f64..1.9);
            let kappa = rng.gen_range(0.01f64..0.49);
            let e = theorem_exponents(3, p, q, kappa).map_err(|e| e.to_string())?;
            if q > p && kappa < (2.0 * p - q) / (q - p) {
                remark_ok &= e.gamma < 1.0;
            }
            if q > p && kappa < 2.0 * (p - 1.0) / (q - p) {
                remark_ok &= e.gamma_tilde < 1.0;
            }
        }
        let pass = worst_tau <= 1e-14 && worst_id <= 1e-12 && remark_ok;
        Ok((
            pass,
            format!(
                "tau relation {worst_tau:.1e} (<=1e-14), identities {worst_id:.1e} (<=1e-12), \
                 n=3 implications {}",
                if remark_ok { "hold" } else { "violated" }
            ),
        ))
    })();
    finish(3, "exponent algebra", start, result)
}

/// 4: rearrangement equimeasurability, omega lower bound, inverse
/// round-trip, and the Lorentz norm of constants.
pub fn criterion_4() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst_lp = 0.0f64;
        let mut worst_omega = 0.0f64;
        let mut worst_inv = 0.0f64;
        for _ in 0..100 {
            let count = rng.gen_range(2usize..30);
            let pairs: Vec<(f64, f64)> = (0..count)
                .map(|_| (rng.gen_range(0.1f64..5.0), rng.gen_range(0.01f64..1.0)))
                .collect();
            let samples = WeightedSamples::new(pairs).map_err(|e| e.to_string())?;
            let profile = rearrange(&samples);
            for p in [1.0, 2.0, 3.0] {
                let a = samples.lp_norm(p);
                let b = lp_norm_from_profile(&profile, p).powf(1.0 / p);
                worst_lp = worst_lp.max((a - b).abs() / b);
            }
            let total = profile.total_measure();
            for &b in profile.breakpoints() {
                if b > 0.0 && b < total {
                    let om = omega(&profile, b).map_err(|e| e.to_string())?;
                    // omega(t) >= sqrt(t) f*(t) since f* is non-increasing
                    let lower = b.sqrt() * profile.eval(b);
                    worst_omega = worst_omega.max(lower - om);
                }
            }
            for _ in 0..5 {
                let t = rng.gen_range(0.0..1.0) * total;
                let y = omega(&profile, t).map_err(|e| e.to_string())?;
                let inv = omega_inverse(&profile, y).map_err(|e| e.to_string())?;
                worst_inv = worst_inv.max((inv.t - t).abs() / total);
            }
        }
        let mut worst_const = 0.0f64;
        for n in 3..=6 {
            let c = rng.gen_range(0.5f64..4.0);
            let v = rng.gen_range(0.2f64..3.0);
            let samples = WeightedSamples::new(vec![(c, v)]).map_err(|e| e.to_string())?;
            let expect = n as f64 * c * v.powf(1.0 / n as f64);
            let got = lorentz_n1(&rearrange(&samples), n);
            worst_const = worst_const.max((got - expect).abs() / expect);
        }
        let pass = worst_lp <= 1e-12
            && worst_omega <= 1e-12
            && worst_inv <= 1e-10
            && worst_const <= 1e-10;
        Ok((
            pass,
            format!(
                "Lp {worst_lp:.1e}, omega bound slack {worst_omega:.1e}, \
                 inverse {worst_inv:.1e}, constants {worst_const:.1e}"
            ),
        ))
    })();
    finish(4, "rearrangement suite", start, result)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let simpson = |a: f64, b: f64| {
        let m = 0.5 * (a + b);
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    };
    let whole = simpson(a, b);
    let left = simpson(a, m);
    let right = simpson(m, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, m, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, tol / 2.0, depth - 1)
    }
}

/// 5: `G_T` closed form against adaptive quadrature of `g_1(s) s`.
pub fn criterion_5() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let nu = rng.gen_range(0.5f64..3.0);
            let p = rng.gen_range(1.2f64..3.5);
            let mu = rng.gen_range(0.0f64..1.0);
            let t_cut = rng.gen_range(0.1f64..1.0);
            let t = t_cut + rng.gen_range(0.0f64..4.0);
            let params = PQParams::new(nu, 2.0 * nu, p, p + 0.5, mu).map_err(|e| e.to_string())?;
            let env = GrowthEnvelope::new(params, 0.0, t_cut).map_err(|e| e.to_string())?;
            let closed = env.g_cap(t);
            let integrand = |s: f64| env.g1(s).unwrap() * s;
            let quad = adaptive_simpson(&integrand, t_cut, t, 1e-12 * closed.max(1e-3), 40);
            worst = worst.max((closed - quad).abs() / closed.max(1e-300));
        }
        Ok((worst <= 1e-8, format!("worst relative deviation {worst:.1e}")))
    })();
    finish(5, "G_T closed form vs quadrature", start, result)
}

fn poisson_error(n: usize, h: f64, tol: f64) -> Result<f64, String> {
    let params = PQParams::new(1.0, 2.0, 2.0, 2.0, 0.0).map_err(|e| e.to_string())?;
    let base = ModelIntegrand::new(params, 1.0, 0.0).map_err(|e| e.to_string())?;
    let reg = RegularizedIntegrand::new(base, 1e-12, 1.0).map_err(|e| e.to_string())?;
    let g = Grid::new(n, 1.0, h).map_err(|e| e.to_string())?;
    let f = ScalarField::constant(g.clone(), 4.0 * n as f64).map_err(|e| e.to_string())?;
    let b = ScalarField::constant(g.clone(), 0.0).map_err(|e| e.to_string())?;
    let problem = MinimizationProblem {
        integrand: &reg,
        forcing: &f,
        boundary: &b,
        region: Region::Ball(BallRegion::centered(n, 1.0).map_err(|e| e.to_string())?),
    };
    let (u, _) = minimize(&problem, tol).map_err(|e| e.to_string())?;
    let mut err = 0.0f64;
    let mut it = u.grid().nodes();
    while let Some((flat, _, x)) = it.advance() {
        let r2 = x.iter().map(|v| v * v).sum::<f64>();
        if r2 < 1.0 {
            err = err.max((u.values()[flat] - (1.0 - r2)).abs());
        }
    }
    Ok(err)
}

/// 6: manufactured Poisson solution converges at second order and the
/// nonlinear and linear solvers agree.
pub fn criterion_6() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let mut pass = true;
        let mut detail = String::new();
        for (n, h) in [(2usize, 1.0 / 16.0), (3, 1.0 / 16.0)] {
            let e1 = poisson_error(n, h, 1e-11)?;
            let e2 = poisson_error(n, h / 2.0, 1e-11)?;
            let ratio = e1 / e2;
            pass &= (3.5..=4.5).contains(&ratio);
            detail.push_str(&format!("n={n}: order ratio {ratio:.2}; "));
        }
        // cross-check: F = |z|^2 minimization vs a = 2I linear solve
        let tol = 1e-11;
        let params = PQParams::new(1.0, 2.0, 2.0, 2.0, 0.0).map_err(|e| e.to_string())?;
        let base = ModelIntegrand::new(params, 1.0, 0.0).map_err(|e| e.to_string())?;
        let reg = RegularizedIntegrand::new(base, 1e-12, 1.0).map_err(|e| e.to_string())?;
        let g = Grid::new(3, 1.0, 1.0 / 32.0).map_err(|e| e.to_string())?;
        let f = ScalarField::constant(g.clone(), 12.0).map_err(|e| e.to_string())?;
        let b = ScalarField::constant(g.clone(), 0.0).map_err(|e| e.to_string())?;
        let region = Region::Ball(BallRegion::centered(3, 1.0).map_err(|e| e.to_string())?);
        let problem = MinimizationProblem {
            integrand: &reg,
            forcing: &f,
            boundary: &b,
            region: region.clone(),
        };
        let (u1, _) = minimize(&problem, tol).map_err(|e| e.to_string())?;
        let a = EllipticCoefficients::diagonal(&[2.0, 2.0, 2.0]).map_err(|e| e.to_string())?;
        let (u2, _) = solve_linear(&a, &b, &f, &region, tol).map_err(|e| e.to_string())?;
        let sup = u1
            .values()
            .iter()
            .zip(u2.values())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        pass &= sup <= 2.0 * tol;
        detail.push_str(&format!("cross-check sup diff {sup:.1e} (<= {:.0e})", 2.0 * tol));
        Ok((pass, detail))
    })();
    finish(6, "solver order and cross-check", start, result)
}

/// 7: estimated Caccioppoli constant tracks `Lambda^{1/2}`.
pub fn criterion_7() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let mut pass = true;
        let mut detail = String::new();
        let g = Grid::new(3, 1.0, 1.0 / 12.0).map_err(|e| e.to_string())?;
        for lambda in [10.0, 100.0] {
            let v = crate::experiments::counterexample_field(&g, lambda)
                .map_err(|e| e.to_string())?;
            let f = ScalarField::constant(g.clone(), 0.0).map_err(|e| e.to_string())?;
            let mut cutoffs = vec![];
            for i in 0..4 {
                let rho = 0.35 + 0.08 * i as f64;
                for j in 1..4 {
                    let sigma = rho + 0.12 + 0.12 * j as f64;
                    if sigma <= 1.0 {
                        cutoffs.push(radial_tent(&g, rho, sigma).map_err(|e| e.to_string())?);
                    }
                }
            }
            let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
            let c_m = 8.0f64.sqrt();
            let est = estimate_caccioppoli_constants(&v, &f, &levels, c_m, &cutoffs)
                .map_err(|e| e.to_string())?;
            pass &= est.m1 <= 1.1 * lambda.sqrt();
            detail.push_str(&format!(
                "L={lambda}: M1 {:.3} vs 1.1 sqrt(L) {:.3}; ",
                est.m1,
                1.1 * lambda.sqrt()
            ));
        }
        Ok((pass, detail))
    })();
    finish(7, "Caccioppoli constant estimation", start, result)
}

/// 8: the iteration bound dominates the grid supremum with the predicted
/// decay, and stays within three orders of magnitude of the sharp scale.
pub fn criterion_8() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let lambda = 10.0;
        let kappa = 0.25;
        let g = Grid::new(3, 1.0, 1.0 / 12.0).map_err(|e| e.to_string())?;
        let v =
            crate::experiments::counterexample_field(&g, lambda).map_err(|e| e.to_string())?;
        let f = ScalarField::constant(g.clone(), 0.0).map_err(|e| e.to_string())?;
        let ts = two_star(3, kappa).map_err(|e| e.to_string())?;
        let c_obs = estimate_sphere_sobolev_constant(&g, ts, 0.75, &zonal_profile_library())
            .map_err(|e| e.to_string())?;
        let constants = IterationConstants::new(
            3,
            kappa,
            c1_from_sphere_constant(c_obs, ts),
            c2_default(3).map_err(|e| e.to_string())?,
            8.0f64.sqrt(),
            lambda.sqrt(),
            0.0,
            0.0,
        )
        .map_err(|e| e.to_string())?;
        let trace = run_iteration(&v, &f, &constants, 200).map_err(|e| e.to_string())?;
        let bound = trace.bound.ok_or("iteration did not converge")?;
        let half = BallRegion::centered(3, 0.5).map_err(|e| e.to_string())?;
        let unit = BallRegion::centered(3, 1.0).map_err(|e| e.to_string())?;
        let plus = v.map(|t| t.max(0.0));
        let sup = plus.sup_ball(&half).map_err(|e| e.to_string())?;
        let l2 = plus
            .map(|t| t * t)
            .integrate_ball(&unit)
            .map_err(|e| e.to_string())?
            .sqrt();
        let decay_ok = trace.rows.iter().all(|r| r.pass || r.below_noise_floor);
        let scale = bound / l2;
        let cap = 1e3 * lambda.sqrt().powf(1.0 + kappa);
        let pass = bound.is_finite() && bound >= sup && decay_ok && scale <= cap;
        Ok((
            pass,
            format!(
                "bound {bound:.1} >= sup {sup:.3}, decay {}, bound/L2 {scale:.1} \
                 (<= {cap:.0})",
                if decay_ok { "holds" } else { "violated" }
            ),
        ))
    })();
    finish(8, "iteration soundness end to end", start, result)
}

/// 9: cutoff optimization stays below the interpolation bound and
/// reproduces the spherical capacitor.
pub fn criterion_9() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let profiles: [fn(f64) -> f64; 10] = [
            |_| 1.0,
            |r| r,
            |r| r * r,
            |r| (1.0 - r).abs(),
            |r| (-3.0 * r).exp(),
            |r| (6.0 * r).sin().abs(),
            |r| 1.0 / (0.2 + r),
            |r| (r - 0.7).abs().sqrt(),
            |r| (10.0 * r).cos() * (10.0 * r).cos(),
            |r| r.powi(4) + 0.1,
        ];
        let mut pass = true;
        let mut worst = 0.0f64;
        for (i, v) in profiles.iter().enumerate() {
            for delta in [0.25, 0.5, 1.0] {
                let res = optimal_cutoff_radial(3, v, 0.5, 1.0, 1.0 / 128.0, delta)
                    .map_err(|e| e.to_string())?;
                if res.bound > 0.0 {
                    worst = worst.max(res.energy / res.bound);
                }
                if !res.pass {
                    return Ok((false, format!("profile {i}, delta {delta}: {res:?}")));
                }
            }
        }
        let res = optimal_cutoff_radial(3, |_| 1.0, 0.5, 1.0, 1.0 / 128.0, 1.0)
            .map_err(|e| e.to_string())?;
        let capacity = 4.0 * std::f64::consts::PI;
        let dev = (res.energy - capacity).abs() / capacity;
        pass &= dev <= 0.02;
        Ok((
            pass,
            format!("worst energy/bound {worst:.3}, capacitor deviation {dev:.4} (<= 0.02)"),
        ))
    })();
    finish(9, "cutoff lemma", start, result)
}

/// 10: the Lipschitz-estimate ratio is finite and grid-stable for three
/// admissible configurations, and the admissibility gate rejects the
/// supercritical ratio.
pub fn criterion_10() -> Criterion {
    let start = Instant::now();
    let result = (|| {
        let mut pass = true;
        let mut detail = String::new();
        for (p, q) in [(2.0, 2.2), (2.0, 2.4), (2.5, 2.8)] {
            let mut cfg = ExperimentConfig::default();
            cfg.n = 3;
            cfg.p = p;
            cfg.q = q;
            cfg.kappa = 0.2;
            cfg.mu = 1.0;
            cfg.h = 0.25;
            cfg.radius = 1.25;
            cfg.f_amp = 3.0;
            cfg.tol = 1e-7;
            let csv = lipschitz::run(&cfg).map_err(|e| e.to_string())?;
            let drift = csv.column("drift").unwrap()[0];
            let ratios = csv.column("ratio").unwrap();
            let finite = ratios.iter().all(|r| r.is_finite() && *r > 0.0);
            pass &= finite && drift <= 0.20;
            detail.push_str(&format!("(p,q)=({p},{q}): drift {drift:.3}; "));
        }
        let mut cfg = ExperimentConfig::default();
        cfg.n = 3;
        cfg.kappa = 0.2;
        cfg.p = 2.0;
        cfg.q = 2.0 * (1.0 + 2.0 / 2.0 + 0.01);
        let rejected = matches!(
            lipschitz::study_once(&cfg, 0.25),
            Err(crate::CliError::Config(_))
        );
        pass &= rejected;
        detail.push_str(&format!(
            "gate rejects q/p = 2.01: {}",
            if rejected { "yes" } else { "no" }
        ));
        Ok((pass, detail))
    })();
    finish(10, "Lipschitz property check", start, result)
}

/// Run all ten criteria in order.
pub fn run_all() -> Vec<Criterion> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ]
}
