//! Level-set iteration machinery: explicit constants, the geometric
//! truncation iteration, cutoff optimization, hole filling, the subsolution
//! sup bound, and the exponent algebra of the Lipschitz theorem.
//!
//! Geometry is normalized to the unit ball: the iteration consumes a field
//! on a grid covering `B_1`, truncates at rising levels `k_l` on shrinking
//! balls `B_{sigma_l}`, and certifies `sup v` on `B_{1/2}`.

use crate::grid::{BallRegion, Grid, ScalarField};
use crate::rearrangement::{omega_inverse, rearrange, StepProfile, WeightedSamples};
use crate::{Error, Result};

/// Sobolev-on-spheres exponent: `2(n-1)/(n-3)` for `n >= 4`, `2 + 2/kappa`
/// for `n = 3`.
pub fn two_star(n: usize, kappa: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 3 for the sphere Sobolev exponent, got {n}"
        )));
    }
    if n == 3 {
        check_kappa(kappa)?;
        Ok(2.0 + 2.0 / kappa)
    } else {
        Ok(2.0 * (n as f64 - 1.0) / (n as f64 - 3.0))
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(0.0 < kappa && kappa < 0.5) {
        return Err(Error::OutOfRange {
            value: kappa,
            lo: 0.0,
            hi: 0.5,
        });
    }
    Ok(())
}

/// Critical Sobolev exponent `2n/(n-2)`.
pub fn two_star_n(n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "need n >= 3 for the critical Sobolev exponent, got {n}"
        )));
    }
    Ok(2.0 * n as f64 / (n as f64 - 2.0))
}

/// Iteration rate `tau` solving `(2 tau)^{2*/2 - 1} = 2^{-alpha}` with
/// `alpha = 1/2 + 2*/4`; always in `(0, 1/2)`.
pub fn tau(n: usize, kappa: f64) -> Result<f64> {
    let ts = two_star(n, kappa)?;
    let alpha = 0.5 + ts / 4.0;
    Ok(0.5 * 2.0f64.powf(-alpha / (ts / 2.0 - 1.0)))
}

/// All constants entering the truncation iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationConstants {
    pub n: usize,
    pub kappa: f64,
    pub two_star: f64,
    pub two_star_n: f64,
    pub alpha: f64,
    pub tau: f64,
    /// Sphere-Sobolev / cutoff-optimization constant.
    pub c1: f64,
    /// n-dimensional Sobolev constant in the level-measure bound.
    pub c2: f64,
    pub c_m: f64,
    pub m1: f64,
    pub m2: f64,
    pub k0: f64,
}

impl IterationConstants {
    pub fn new(
        n: usize,
        kappa: f64,
        c1: f64,
        c2: f64,
        c_m: f64,
        m1: f64,
        m2: f64,
        k0: f64,
    ) -> Result<Self> {
        check_kappa(kappa)?;
        if !(c1 >= 1.0 && c2 >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "structural constants must satisfy c1, c2 >= 1, got c1 = {c1}, c2 = {c2}"
            )));
        }
        if !(c_m > 0.0) || !(m1 >= 1.0) || !(m2 >= 0.0) || !(k0 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need c_m > 0, M1 >= 1, M2 >= 0, k0 >= 0, got \
                 c_m = {c_m}, M1 = {m1}, M2 = {m2}, k0 = {k0}"
            )));
        }
        let ts = two_star(n, kappa)?;
        Ok(Self {
            n,
            kappa,
            two_star: ts,
            two_star_n: two_star_n(n)?,
            alpha: 0.5 + ts / 4.0,
            tau: tau(n, kappa)?,
            c1,
            c2,
            c_m,
            m1,
            m2,
            k0,
        })
    }

    /// `2*/2 - 1`, the exponent governing the nonlinear gain per step.
    pub fn gain(&self) -> f64 {
        self.two_star / 2.0 - 1.0
    }

    /// Exponent of `M1` in the final bound: `1/(2*/2 - 1)`, which equals
    /// `max(kappa, (n-3)/2)`.
    pub fn m1_exponent(&self) -> f64 {
        1.0 / self.gain()
    }
}

/// The three pieces of one level increment `Delta_l`.
#[derive(Debug, Clone, Copy)]
pub struct DeltaParts {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// True when the forcing-modulus inversion saturated: the demanded
    /// level undershoots the total mass of `omega_f`, so any positive
    /// increment works and `d2` is reported as zero.
    pub saturated: bool,
}

impl DeltaParts {
    pub fn total(&self) -> f64 {
        self.d1 + self.d2 + self.d3
    }
}

/// Level increment at step `ell >= 1`:
/// `d1 = (2^alpha 3 c1 c_m M1 tau^{-2*/2})^{1/(2*/2-1)} J0 2^{-ell}`,
/// `d3 = (3 c2 / tau)^{n/2*_n} tau^{ell-1} J0`, and `d2` the smallest value
/// with `c_m M2 omega_f(c2 J_prev^{2*_n} / d2^{2*_n}) <= tau^ell J0 / 3`,
/// obtained by inverting `omega_f` first and taking the `2*_n`-th root.
pub fn delta_parts(
    ell: usize,
    j0: f64,
    j_prev: f64,
    k: &IterationConstants,
    omega_f: Option<&StepProfile>,
) -> Result<DeltaParts> {
    if ell == 0 {
        return Err(Error::InvalidParameter("delta_parts needs ell >= 1".into()));
    }
    if !(j0 >= 0.0 && j_prev >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "norms must be non-negative, got J0 = {j0}, J_prev = {j_prev}"
        )));
    }
    let g = k.gain();
    let d1 = (2.0f64.powf(k.alpha) * 3.0 * k.c1 * k.c_m * k.m1 * k.tau.powf(-g - 1.0))
        .powf(1.0 / g)
        * j0
        * 2.0f64.powi(-(ell as i32));
    let d3 = (3.0 * k.c2 / k.tau).powf(k.n as f64 / k.two_star_n)
        * k.tau.powi(ell as i32 - 1)
        * j0;
    let mut d2 = 0.0;
    let mut saturated = false;
    if k.m2 > 0.0 && j_prev > 0.0 {
        if let Some(profile) = omega_f {
            let target = k.tau.powi(ell as i32) * j0 / (3.0 * k.c_m * k.m2);
            let inv = omega_inverse(profile, target)?;
            if inv.saturated {
                saturated = true;
            } else if inv.t > 0.0 {
                d2 = k.c2.powf(1.0 / k.two_star_n) * j_prev / inv.t.powf(1.0 / k.two_star_n);
            } else {
                // omega exceeds the target immediately: no finite increment
                d2 = f64::INFINITY;
            }
        }
    }
    Ok(DeltaParts { d1, d2, d3, saturated })
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy)]
pub struct IterationRow {
    pub ell: usize,
    pub k: f64,
    pub sigma: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub j: f64,
    /// Predicted decay `tau^ell J0`.
    pub target: f64,
    /// `J_ell <= tau^ell J0` as measured on the grid.
    pub pass: bool,
    /// `J_ell < 10 h J0`: the measured value sits at discretization noise
    /// and a failed `pass` carries no information.
    pub below_noise_floor: bool,
}

/// Full record of one iteration run.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub j0: f64,
    pub rows: Vec<IterationRow>,
    /// `k0 + sum Delta_ell`; `None` when the increment series did not
    /// fall below the truncation threshold within `ell_max` steps.
    pub bound: Option<f64>,
    pub omega_saturated: bool,
}

const DELTA_TRUNCATION_REL: f64 = 1e-12;

/// Run the truncation iteration for `v` (non-negative part is truncated at
/// the rising levels) against forcing `f`, both sampled on a grid covering
/// `B_1`. Per step: `J_ell = || (v - k_ell)_+ ||_{W^{1,2}(B_{sigma_ell})}`
/// with `sigma_ell = 1/2 + 2^{-(ell+1)}`, compared against `tau^ell J0`.
pub fn run_iteration(
    v: &ScalarField,
    f: &ScalarField,
    k: &IterationConstants,
    ell_max: usize,
) -> Result<IterationTrace> {
    if v.grid() != f.grid() {
        return Err(Error::InvalidParameter(
            "field and forcing live on different grids".into(),
        ));
    }
    let n = v.grid().dim();
    if n != k.n {
        return Err(Error::InvalidParameter(format!(
            "constants are for dimension {}, field has {n}",
            k.n
        )));
    }
    let unit = BallRegion::centered(n, 1.0)?;
    let h = v.grid().spacing();
    let j0 = v.truncate_above(k.k0).w12_norm(&unit)?;
    if j0 == 0.0 {
        return Ok(IterationTrace {
            j0,
            rows: Vec::new(),
            bound: Some(k.k0),
            omega_saturated: false,
        });
    }
    let omega_f = rearrange(&WeightedSamples::from_field(f, &unit)?);
    let mut rows = Vec::new();
    let mut level = k.k0;
    let mut j_prev = j0;
    let mut omega_saturated = false;
    let mut converged = false;
    for ell in 1..=ell_max.max(1) {
        let parts = delta_parts(ell, j0, j_prev, k, Some(&omega_f))?;
        omega_saturated |= parts.saturated;
        let delta = parts.total();
        if !delta.is_finite() {
            break;
        }
        level += delta;
        let sigma = 0.5 + 2.0f64.powi(-(ell as i32 + 1));
        let j = v
            .truncate_above(level)
            .w12_norm(&BallRegion::centered(n, sigma)?)?;
        let target = k.tau.powi(ell as i32) * j0;
        rows.push(IterationRow {
            ell,
            k: level,
            sigma,
            d1: parts.d1,
            d2: parts.d2,
            d3: parts.d3,
            j,
            target,
            pass: j <= target,
            below_noise_floor: j < 10.0 * h * j0,
        });
        j_prev = j;
        if delta < DELTA_TRUNCATION_REL * j0 {
            converged = true;
            break;
        }
    }
    Ok(IterationTrace {
        j0,
        rows,
        bound: if converged { Some(level) } else { None },
        omega_saturated,
    })
}

/// Assembled explicit sup bound and its pieces.
#[derive(Debug, Clone, Copy)]
pub struct LinftyBound {
    /// `k0 + (a1 M1^e + a3) j0_bound + a2 M2 ||f||_{n,1}`.
    pub bound: f64,
    /// Geometric sum of the `d1` increments, without the `M1^e` factor.
    pub a1: f64,
    /// Coefficient of `M2 ||f||_{n,1}` from the forcing tail.
    pub a2: f64,
    /// Geometric sum of the `d3` increments.
    pub a3: f64,
    /// A-priori bound on `J0` from the Caccioppoli inequality.
    pub j0_bound: f64,
    /// `max(kappa, (n-3)/2)`, the exponent of `M1` beyond the first power.
    pub m1_exponent: f64,
}

/// Volume of the n-dimensional unit ball.
pub fn ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * ball_volume(n - 2),
    }
}

/// Evaluate the explicit sup bound from the L2 mass of `(v - k0)_+` on
/// `B_1` and the Lorentz norm of the forcing. Every coefficient follows
/// the increment sums: the `d1` series is geometric with ratio 1/2, the
/// `d3` series with ratio `tau`, and the forcing series telescopes into
/// `3 c_m M2 / (2 tau^2 |ln tau|)` times the Lorentz norm.
pub fn linfty_bound(k: &IterationConstants, l2_mass: f64, lorentz_f: f64) -> Result<LinftyBound> {
    if !(l2_mass >= 0.0 && lorentz_f >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "norms must be non-negative, got L2 = {l2_mass}, Lorentz = {lorentz_f}"
        )));
    }
    let g = k.gain();
    let e = 1.0 / g;
    let a1 = (2.0f64.powf(k.alpha) * 3.0 * k.c1 * k.c_m * k.tau.powf(-k.two_star / 2.0)).powf(e);
    let a3 = (3.0 * k.c2 / k.tau).powf((k.n as f64 - 2.0) / 2.0) / (1.0 - k.tau);
    let a2 = k.c2.powf(1.0 / k.two_star_n) * 3.0 * k.c_m
        / (2.0 * k.tau * k.tau * k.tau.ln().abs());
    // omega_f(|B_1|) <= ||f||_{n,1} |B_1|^{1/2 - 1/n} / (n sqrt(1 - 2/n))
    let nf = k.n as f64;
    let omega_b =
        lorentz_f * ball_volume(k.n).powf(0.5 - 1.0 / nf) / (nf * (1.0 - 2.0 / nf).sqrt());
    let j0_bound = (1.0 + k.c_m * k.c_m * k.m1 * k.m1).sqrt() * l2_mass + k.c_m * k.m2 * omega_b;
    let bound = k.k0 + (a1 * k.m1.powf(e) + a3) * j0_bound + a2 * k.m2 * lorentz_f;
    Ok(LinftyBound {
        bound,
        a1,
        a2,
        a3,
        j0_bound,
        m1_exponent: e,
    })
}

/// Exponent of `Lambda/nu` in the subsolution sup bound:
/// `(n-1)/4` for `n >= 4`, `(1+kappa)/2` for `n = 3`.
pub fn prop2_m(n: usize, kappa: f64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "the subsolution bound needs n >= 3, got {n}"
        )));
    }
    if n == 3 {
        check_kappa(kappa)?;
        Ok((1.0 + kappa) / 2.0)
    } else {
        Ok((n as f64 - 1.0) / 4.0)
    }
}

/// Optimal radial cutoff on a grid field.
#[derive(Debug, Clone)]
pub struct CutoffResult {
    pub eta: ScalarField,
    /// Achieved `sum |v| |grad eta|^2 h^n`.
    pub energy: f64,
    /// Right side of the one-dimensional minimization bound.
    pub bound: f64,
    /// `energy <= bound` up to 1e-6 relative.
    pub pass: bool,
}

/// Minimize `sum |v| |grad eta|^2 h^n` over radial piecewise-linear
/// cutoffs (`eta = 1` on `B_rho`, 0 outside `B_sigma`): the energy is a
/// weighted sum of squared drops per shell, minimized exactly by drops
/// proportional to the reciprocal shell weights (harmonic-sum formula).
/// The reported bound is the `delta`-interpolation bound evaluated with
/// discrete sphere integrals.
pub fn optimal_cutoff(v: &ScalarField, rho: f64, sigma: f64, delta: f64) -> Result<CutoffResult> {
    let grid = v.grid();
    let h = grid.spacing();
    check_cutoff_geometry(rho, sigma, sigma.min(grid.half_width()), h, delta)?;
    let shells = ((sigma - rho) / h).round().max(2.0) as usize;
    let dr = (sigma - rho) / shells as f64;
    // shell weights of |v| and discrete sphere integrals at midpoints
    let mut weights = vec![0.0f64; shells];
    let hn = grid.cell_volume();
    let mut it = grid.nodes();
    while let Some((flat, _, x)) = it.advance() {
        let r = x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
        if r >= rho && r < sigma {
            let j = (((r - rho) / dr) as usize).min(shells - 1);
            weights[j] += v.values()[flat].abs() * hn;
        }
    }
    let abs_v = v.map(f64::abs);
    let mut bound_acc = 0.0;
    for (j, _) in weights.iter().enumerate() {
        let mid = rho + (j as f64 + 0.5) * dr;
        bound_acc += abs_v.sphere_integral(mid)?.powf(delta) * dr;
    }
    let bound = (sigma - rho).powf(-(1.0 + 1.0 / delta)) * bound_acc.powf(1.0 / delta);
    // harmonic-sum minimizer: drop_j proportional to dr^2 / W_j
    let (energy, drops) = harmonic_minimizer(&weights, dr);
    let mut eta_knots = vec![1.0f64; shells + 1];
    for j in 0..shells {
        eta_knots[j + 1] = (eta_knots[j] - drops[j]).max(0.0);
    }
    let eta = ScalarField::from_fn(grid.clone(), |x| {
        let r = x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
        if r <= rho {
            1.0
        } else if r >= sigma {
            0.0
        } else {
            let s = (r - rho) / dr;
            let j = (s as usize).min(shells - 1);
            let frac = s - j as f64;
            eta_knots[j] * (1.0 - frac) + eta_knots[j + 1] * frac
        }
    })?;
    let pass = energy <= bound * (1.0 + 1e-6) + 1e-300;
    Ok(CutoffResult {
        eta,
        energy,
        bound,
        pass,
    })
}

fn check_cutoff_geometry(rho: f64, sigma: f64, max_r: f64, h: f64, delta: f64) -> Result<()> {
    if !(0.0 < rho && rho < sigma) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < rho < sigma, got rho = {rho}, sigma = {sigma}"
        )));
    }
    if sigma > max_r + 1e-12 {
        return Err(Error::OutOfRange {
            value: sigma,
            lo: rho,
            hi: max_r,
        });
    }
    if sigma - rho < 2.0 * h {
        return Err(Error::DegenerateShell {
            width: sigma - rho,
            two_h: 2.0 * h,
        });
    }
    if !(0.0 < delta && delta <= 1.0) {
        return Err(Error::OutOfRange {
            value: delta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Exact minimizer of `sum_j W_j (drop_j / dr)^2` over drops summing to 1.
fn harmonic_minimizer(weights: &[f64], dr: f64) -> (f64, Vec<f64>) {
    // a shell with zero weight absorbs the whole drop for free
    if let Some(j0) = weights.iter().position(|&w| w == 0.0) {
        let mut drops = vec![0.0; weights.len()];
        drops[j0] = 1.0;
        return (0.0, drops);
    }
    let inv_sum: f64 = weights.iter().map(|w| dr * dr / w).sum();
    let energy = 1.0 / inv_sum;
    let drops = weights
        .iter()
        .map(|w| energy * dr * dr / w)
        .collect::<Vec<_>>();
    (energy, drops)
}

/// Optimal radial cutoff for a radially symmetric `|v|` given as a
/// function of `r`, on a 1-D shell mesh of width `h`.
#[derive(Debug, Clone)]
pub struct RadialCutoffResult {
    pub radii: Vec<f64>,
    pub eta: Vec<f64>,
    pub energy: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn optimal_cutoff_radial(
    n: usize,
    v: impl Fn(f64) -> f64,
    rho: f64,
    sigma: f64,
    h: f64,
    delta: f64,
) -> Result<RadialCutoffResult> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "radial cutoff needs n >= 2, got {n}"
        )));
    }
    check_cutoff_geometry(rho, sigma, sigma, h, delta)?;
    let shells = ((sigma - rho) / h).round().max(2.0) as usize;
    let dr = (sigma - rho) / shells as f64;
    let surface = n as f64 * ball_volume(n);
    let mut weights = vec![0.0f64; shells];
    let mut bound_acc = 0.0;
    for (j, w) in weights.iter_mut().enumerate() {
        let mid = rho + (j as f64 + 0.5) * dr;
        let sphere = surface * mid.powi(n as i32 - 1) * v(mid).abs();
        *w = sphere * dr;
        bound_acc += sphere.powf(delta) * dr;
    }
    let bound = (sigma - rho).powf(-(1.0 + 1.0 / delta)) * bound_acc.powf(1.0 / delta);
    let (energy, drops) = harmonic_minimizer(&weights, dr);
    let mut eta = vec![1.0f64];
    let mut radii = vec![rho];
    for j in 0..shells {
        radii.push(rho + (j as f64 + 1.0) * dr);
        let last = *eta.last().unwrap();
        eta.push((last - drops[j]).max(0.0));
    }
    let pass = energy <= bound * (1.0 + 1e-6) + 1e-300;
    Ok(RadialCutoffResult {
        radii,
        eta,
        energy,
        bound,
        pass,
    })
}

/// Hole-filling constant `c(alpha, theta) = (1-lambda)^{-alpha} /
/// (1 - theta lambda^{-alpha})` with `lambda = theta^{1/(2 alpha)}`
/// (1/2 when `theta = 0`), and the bound `c ((sigma-rho)^{-alpha} A + B)`.
pub fn hole_filling_bound(
    theta: f64,
    a: f64,
    b: f64,
    alpha: f64,
    rho: f64,
    sigma: f64,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::OutOfRange {
            value: theta,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if !(alpha > 0.0) || !(a >= 0.0) || !(b >= 0.0) || !(rho < sigma) {
        return Err(Error::InvalidParameter(format!(
            "need alpha > 0, A, B >= 0, rho < sigma; got alpha = {alpha}, \
             A = {a}, B = {b}, rho = {rho}, sigma = {sigma}"
        )));
    }
    let lambda = if theta == 0.0 {
        0.5
    } else {
        theta.powf(1.0 / (2.0 * alpha))
    };
    let c = (1.0 - lambda).powf(-alpha) / (1.0 - theta * lambda.powf(-alpha));
    let bound = c * ((sigma - rho).powf(-alpha) * a + b);
    Ok((c, bound))
}

/// Result of testing sampled `Z` against the hole-filling lemma.
#[derive(Debug, Clone, Copy)]
pub struct HoleFillingReport {
    pub c: f64,
    pub bound: f64,
    /// `Z(s) <= theta Z(t) + (t-s)^{-alpha} A + B` over all sample pairs.
    pub hypothesis_ok: bool,
    /// `Z(rho) <= bound`.
    pub conclusion_ok: bool,
}

/// Check the hole-filling hypothesis on every ordered pair of samples
/// `(t_i, Z_i)` and the conclusion at the left endpoint.
pub fn hole_filling_check(
    samples: &[(f64, f64)],
    theta: f64,
    a: f64,
    b: f64,
    alpha: f64,
) -> Result<HoleFillingReport> {
    if samples.len() < 2 {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let rho = sorted.first().unwrap().0;
    let sigma = sorted.last().unwrap().0;
    let (c, bound) = hole_filling_bound(theta, a, b, alpha, rho, sigma)?;
    let mut hypothesis_ok = true;
    for i in 0..sorted.len() {
        for j in (i + 1)..sorted.len() {
            let (s, zs) = sorted[i];
            let (t, zt) = sorted[j];
            if zs > theta * zt + (t - s).powf(-alpha) * a + b + 1e-12 * (zs.abs() + 1.0) {
                hypothesis_ok = false;
            }
        }
    }
    let conclusion_ok = sorted[0].1 <= bound * (1.0 + 1e-12);
    Ok(HoleFillingReport {
        c,
        bound,
        hypothesis_ok,
        conclusion_ok,
    })
}

/// Exponents of the Lipschitz theorem and their admissibility flags.
#[derive(Debug, Clone, Copy)]
pub struct ExponentSet {
    pub gamma: f64,
    pub gamma_tilde: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
    /// Subsolution bound exponent.
    pub m: f64,
    /// `q/p < 1 + min(2/(n-1), 4(p-1)/(p(n-3)))`.
    pub pqrhs_ok: bool,
    /// `q/p < 1 + 2/(n-1)`.
    pub pq_ok: bool,
    /// `kappa < min(1/2, (2p-q)/(q-p), 2(p-1)/(q-p))`.
    pub kappa_ok: bool,
}

impl ExponentSet {
    pub fn admissible(&self) -> bool {
        self.pqrhs_ok && self.pq_ok && self.kappa_ok
    }
}

/// Compute the growth exponents `gamma`, `gamma_tilde`, the iteration
/// exponents `alpha_n = 1/(2p(1-gamma))`, `beta_n = 1/(p(1-gamma_tilde))`,
/// the subsolution exponent `m`, and the admissibility flags.
pub fn theorem_exponents(n: usize, p: f64, q: f64, kappa: f64) -> Result<ExponentSet> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "exponent algebra needs n >= 3, got {n}"
        )));
    }
    if !(1.0 < p && p <= q) {
        return Err(Error::InvalidParameter(format!(
            "need 1 < p <= q, got p = {p}, q = {q}"
        )));
    }
    check_kappa(kappa)?;
    let nf = n as f64;
    let mx = kappa.max((nf - 3.0) / 2.0);
    let gamma = 0.5 * (q - p) / p * mx + q / (2.0 * p);
    let gamma_tilde = 0.5 * (q - p) / p * mx + 1.0 / p;
    let alpha_n = if gamma < 1.0 {
        1.0 / (2.0 * p * (1.0 - gamma))
    } else {
        f64::INFINITY
    };
    let beta_n = if gamma_tilde < 1.0 {
        1.0 / (p * (1.0 - gamma_tilde))
    } else {
        f64::INFINITY
    };
    let ratio = q / p;
    let pq_ok = ratio < 1.0 + 2.0 / (nf - 1.0);
    let pqrhs_ok = if n >= 4 {
        ratio < 1.0 + (2.0 / (nf - 1.0)).min(4.0 * (p - 1.0) / (p * (nf - 3.0)))
    } else {
        pq_ok
    };
    let kappa_ok = if q > p {
        kappa < 0.5f64.min(((2.0 * p - q) / (q - p)).min(2.0 * (p - 1.0) / (q - p)))
    } else {
        true
    };
    Ok(ExponentSet {
        gamma,
        gamma_tilde,
        alpha_n,
        beta_n,
        m: prop2_m(n, kappa)?,
        pqrhs_ok,
        pq_ok,
        kappa_ok,
    })
}

/// Library of zonal profiles `phi(x_n / |x|)` used to probe the sphere
/// Sobolev constant.
pub fn zonal_profile_library() -> Vec<fn(f64) -> f64> {
    vec![
        |_| 1.0,
        |s| s,
        |s| s * s,
        |s| s.abs(),
        |s| s.exp(),
        |s| 1.0 / (1.2 - s),
        |s| (1.0 + s).powi(3),
        |s| (std::f64::consts::PI * s).cos(),
        |s| (3.0 * s).tanh(),
        |s| s.abs().sqrt(),
    ]
}

/// Largest observed ratio `||w||_{L^{2*}(S_r)} / ||w||_{W^{1,2}(S_r)}`
/// over zonal profiles on the discrete sphere of radius `r`; used as the
/// default sphere Sobolev constant unless overridden.
pub fn estimate_sphere_sobolev_constant(
    grid: &Grid,
    two_star: f64,
    r: f64,
    profiles: &[fn(f64) -> f64],
) -> Result<f64> {
    if profiles.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(two_star > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "sphere exponent must exceed 2, got {two_star}"
        )));
    }
    let mut best = 0.0f64;
    for phi in profiles {
        let w = ScalarField::from_fn(grid.clone(), |x| {
            let norm = x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
            if norm < 1e-12 {
                phi(0.0)
            } else {
                phi(x[grid.dim() - 1] / norm)
            }
        })?;
        let grad2 = w.gradient()?.magnitude_squared();
        let num = w
            .map(|v| v.abs().powf(two_star))
            .sphere_integral(r)?
            .powf(1.0 / two_star);
        let den_field = ScalarField::new(
            grid.clone(),
            w.values()
                .iter()
                .zip(grad2.values())
                .map(|(a, g)| a * a + g)
                .collect(),
        )?;
        let den = den_field.sphere_integral(r)?.sqrt();
        if den > 0.0 {
            best = best.max(num / den);
        }
    }
    Ok(best)
}

/// Sphere-constant to iteration-constant conversion: the optimization
/// argument uses the sphere Sobolev inequality once per radius, raised to
/// the power `2*/2` after undoing the interpolation exponent.
pub fn c1_from_sphere_constant(c_obs: f64, two_star: f64) -> f64 {
    c_obs.powf(two_star / 2.0).max(1.0)
}

/// Sharp constant of `||u||_{L^{2n/(n-2)}} <= S_n ||grad u||_{L^2}` on
/// `R^n`.
pub fn sobolev_embedding_constant(n: usize) -> f64 {
    let nf = n as f64;
    let gamma_n = gamma_fn(nf);
    let gamma_half = gamma_fn(nf / 2.0);
    1.0 / (nf * (nf - 2.0) * std::f64::consts::PI).sqrt() * (gamma_n / gamma_half).powf(1.0 / nf)
}

/// Default level-measure constant: the embedding constant with a factor 2
/// margin for the non-zero-boundary `W^{1,2}` norm, raised to `2*_n`,
/// floored at 1.
pub fn c2_default(n: usize) -> Result<f64> {
    Ok((2.0 * sobolev_embedding_constant(n))
        .powf(two_star_n(n)?)
        .max(1.0))
}

/// Lanczos approximation of the Gamma function for positive arguments.
fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_star_examples() {
        assert_eq!(two_star(4, 0.1).unwrap(), 6.0);
        assert_eq!(two_star(5, 0.1).unwrap(), 4.0);
        assert_eq!(two_star(3, 0.25).unwrap(), 10.0);
        assert!(two_star(2, 0.25).is_err());
        assert!(two_star(3, 0.6).is_err());
    }

    #[test]
    fn tau_examples_and_defining_relation() {
        assert!((tau(4, 0.1).unwrap() - 0.25).abs() < 1e-15);
        assert!((tau(5, 0.1).unwrap() - 2.0f64.powf(-2.5)).abs() < 1e-15);
        for n in 3..=8 {
            for kappa in [0.05, 0.25, 0.45] {
                let ts = two_star(n, kappa).unwrap();
                let alpha = 0.5 + ts / 4.0;
                let t = tau(n, kappa).unwrap();
                assert!(t > 0.0 && t < 0.5);
                let lhs = (2.0 * t).powf(ts / 2.0 - 1.0) * 2.0f64.powf(alpha);
                assert!((lhs - 1.0).abs() <= 1e-14, "n={n} kappa={kappa}: {lhs}");
            }
        }
    }

    fn constants(n: usize, kappa: f64, m1: f64, m2: f64) -> IterationConstants {
        IterationConstants::new(n, kappa, 2.0, 1.5, 2.0, m1, m2, 0.0).unwrap()
    }

    #[test]
    fn m1_exponent_matches_closed_form() {
        for (n, kappa) in [(3, 0.1), (3, 0.3), (4, 0.2), (5, 0.2), (6, 0.4)] {
            let k = constants(n, kappa, 2.0, 0.0);
            let expect = kappa.max((n as f64 - 3.0) / 2.0);
            assert!((k.m1_exponent() - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn delta_parts_structure() {
        let k = constants(4, 0.2, 3.0, 0.0);
        let j0 = 1.7;
        // f absent: d2 = 0 at every step; d1 halves; d3 ratio tau
        let mut prev: Option<DeltaParts> = None;
        for ell in 1..=10 {
            let d = delta_parts(ell, j0, j0 * k.tau.powi(ell as i32 - 1), &k, None).unwrap();
            assert_eq!(d.d2, 0.0);
            assert!(!d.saturated);
            if let Some(p) = prev {
                assert!((d.d1 / p.d1 - 0.5).abs() < 1e-14);
                assert!((d.d3 / p.d3 - k.tau).abs() < 1e-14, "{}", d.d3 / p.d3);
            }
            prev = Some(d);
        }
        // d3 absolute value
        let d = delta_parts(1, j0, j0, &k, None).unwrap();
        let expect = (3.0 * k.c2 / k.tau).powf(k.n as f64 / k.two_star_n) * j0;
        assert!((d.d3 - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn delta2_from_forcing_modulus() {
        use crate::rearrangement::{omega, rearrange, WeightedSamples};
        let k = IterationConstants::new(4, 0.2, 2.0, 1.5, 2.0, 1.5, 2.0, 0.0).unwrap();
        let samples =
            WeightedSamples::new(vec![(3.0, 0.2), (1.0, 0.5), (2.0, 0.3), (0.5, 1.0)]).unwrap();
        let profile = rearrange(&samples);
        let j0 = 2.0;
        let d = delta_parts(1, j0, j0, &k, Some(&profile)).unwrap();
        assert!(d.d2 > 0.0 && !d.saturated);
        // defining inequality holds at d2 and fails below it
        let arg = |delta: f64| k.c2 * j0.powf(k.two_star_n) / delta.powf(k.two_star_n);
        let target = k.tau * j0 / 3.0;
        let total = profile.total_measure();
        let at = |delta: f64| {
            k.c_m * k.m2 * omega(&profile, arg(delta).min(total)).unwrap()
        };
        assert!(at(d.d2 * 1.0001) <= target * (1.0 + 1e-9));
        assert!(at(d.d2 * 0.9) > target);
        // huge target saturates: any increment works
        let tiny = IterationConstants::new(4, 0.2, 2.0, 1.5, 2.0, 1.5, 1e-9, 0.0).unwrap();
        let d = delta_parts(1, j0, j0, &tiny, Some(&profile)).unwrap();
        assert!(d.saturated && d.d2 == 0.0);
    }

    fn counterexample_field(grid: &Grid, lambda: f64) -> ScalarField {
        let n = grid.dim();
        ScalarField::from_fn(grid.clone(), move |x| {
            let xn = x[n - 1];
            let rp2: f64 = x[..n - 1].iter().map(|v| v * v).sum();
            xn * xn + 1.0 - lambda * rp2
        })
        .unwrap()
    }

    #[test]
    fn iteration_on_zero_field() {
        let g = Grid::new(3, 1.0, 0.25).unwrap();
        let v = ScalarField::constant(g.clone(), 0.0).unwrap();
        let f = ScalarField::constant(g, 0.0).unwrap();
        let k = constants(3, 0.25, 2.0, 0.0);
        let trace = run_iteration(&v, &f, &k, 200).unwrap();
        assert_eq!(trace.bound, Some(0.0));
        assert_eq!(trace.j0, 0.0);
    }

    #[test]
    fn iteration_soundness_on_counterexample() {
        let lambda = 10.0;
        let g = Grid::new(3, 1.0, 1.0 / 12.0).unwrap();
        let v = counterexample_field(&g, lambda);
        let f = ScalarField::constant(g.clone(), 0.0).unwrap();
        let n = 3.0f64;
        let k = IterationConstants::new(
            3,
            0.25,
            2.0,
            1.5,
            (4.0 * (n - 1.0)).sqrt(),
            lambda.sqrt(),
            0.0,
            0.0,
        )
        .unwrap();
        let trace = run_iteration(&v, &f, &k, 200).unwrap();
        let bound = trace.bound.expect("series converges");
        let half = BallRegion::centered(3, 0.5).unwrap();
        let grid_sup = v.map(|t| t.max(0.0)).sup_ball(&half).unwrap();
        assert!(
            bound >= grid_sup,
            "bound {bound} vs grid sup {grid_sup}"
        );
        // targets hold wherever J is above the noise floor
        for row in &trace.rows {
            assert!(row.pass || row.below_noise_floor, "{row:?}");
        }
    }

    #[test]
    fn iteration_bound_monotone_in_constants() {
        let g = Grid::new(3, 1.0, 1.0 / 8.0).unwrap();
        let v = counterexample_field(&g, 5.0);
        let f = ScalarField::constant(g.clone(), 0.0).unwrap();
        let mut prev = 0.0;
        for s in [1.0, 2.0, 4.0] {
            let k =
                IterationConstants::new(3, 0.25, 2.0 * s, 1.5 * s, 2.0 * s, 5.0f64.sqrt() * s, 0.0, 0.0)
                    .unwrap();
            let b = run_iteration(&v, &f, &k, 200).unwrap().bound.unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn linfty_bound_structure() {
        // contrast-free case: bound linear in the L2 mass
        let k = constants(4, 0.2, 1.0, 0.0);
        let b1 = linfty_bound(&k, 1.0, 0.0).unwrap();
        let b2 = linfty_bound(&k, 2.0, 0.0).unwrap();
        assert!((b2.bound - 2.0 * b1.bound).abs() < 1e-12 * b1.bound);
        // n = 4: exponent on M1 beyond the first power is 1/2
        assert!((b1.m1_exponent - 0.5).abs() < 1e-14);
        // n = 3, kappa = 0.1: exponent 0.1, total power 1.1
        let k3 = constants(3, 0.1, 1.0, 0.0);
        assert!((linfty_bound(&k3, 1.0, 0.0).unwrap().m1_exponent - 0.1).abs() < 1e-14);
        // forcing enters through both the J0 bound and the tail sum
        let kf = IterationConstants::new(4, 0.2, 2.0, 1.5, 2.0, 1.5, 1.0, 0.0).unwrap();
        let with_f = linfty_bound(&kf, 1.0, 1.0).unwrap();
        let without = linfty_bound(&kf, 1.0, 0.0).unwrap();
        assert!(with_f.bound > without.bound);
        assert!(with_f.j0_bound > without.j0_bound);
    }

    #[test]
    fn prop2_exponents() {
        assert!((prop2_m(4, 0.1).unwrap() - 0.75).abs() < 1e-15);
        assert!((prop2_m(5, 0.1).unwrap() - 1.0).abs() < 1e-15);
        assert!((prop2_m(3, 0.1).unwrap() - 0.55).abs() < 1e-15);
        // matches M1 exponent translation: (1 + max(kappa,(n-3)/2))/2
        for (n, kappa) in [(3, 0.2), (4, 0.2), (5, 0.2), (7, 0.3)] {
            let k = constants(n, kappa, 2.0, 0.0);
            let m = prop2_m(n, kappa).unwrap();
            assert!((m - (1.0 + k.m1_exponent()) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_capacitor() {
        // v = 1, n = 3: optimal energy tends to 4 pi / (1/rho - 1/sigma)
        let res = optimal_cutoff_radial(3, |_| 1.0, 0.5, 1.0, 1.0 / 128.0, 1.0).unwrap();
        let capacity = 4.0 * std::f64::consts::PI;
        assert!(
            (res.energy - capacity).abs() < 0.02 * capacity,
            "energy {} vs capacity {capacity}",
            res.energy
        );
        // spec bound at delta = 1: 4 * (4 pi / 3) * (1 - 1/8)
        let expect = 4.0 * (4.0 * std::f64::consts::PI / 3.0) * (1.0 - 0.125);
        assert!((res.bound - expect).abs() < 1e-2 * expect, "{}", res.bound);
        assert!(res.pass);
        // eta decreasing from 1 to 0
        assert_eq!(*res.eta.first().unwrap(), 1.0);
        assert!(res.eta.last().unwrap().abs() < 1e-12);
        assert!(res.eta.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn cutoff_on_grid_fields() {
        let g = Grid::new(3, 1.0, 1.0 / 16.0).unwrap();
        // zero field: zero energy and bound
        let zero = ScalarField::constant(g.clone(), 0.0).unwrap();
        let res = optimal_cutoff(&zero, 0.5, 1.0, 0.5).unwrap();
        assert_eq!(res.energy, 0.0);
        assert_eq!(res.bound, 0.0);
        // a few radial profiles: energy below the bound for each delta
        for (i, profile) in [
            |_r: f64| 1.0,
            |r: f64| r * r,
            |r: f64| (1.0 - r).max(0.0),
            |r: f64| (4.0 * r).sin().abs(),
        ]
        .iter()
        .enumerate()
        {
            let v = ScalarField::from_fn(g.clone(), |x| {
                profile(x.iter().map(|xi| xi * xi).sum::<f64>().sqrt())
            })
            .unwrap();
            for delta in [0.25, 0.5, 1.0] {
                let res = optimal_cutoff(&v, 0.5, 1.0, delta).unwrap();
                assert!(res.pass, "profile {i} delta {delta}: {res:?}",);
            }
        }
    }

    #[test]
    fn cutoff_field_interpolates() {
        let g = Grid::new(2, 1.0, 1.0 / 32.0).unwrap();
        let v = ScalarField::constant(g.clone(), 1.0).unwrap();
        let res = optimal_cutoff(&v, 0.4, 0.9, 1.0).unwrap();
        let mut it = g.nodes();
        while let Some((flat, _, x)) = it.advance() {
            let r = x.iter().map(|xi| xi * xi).sum::<f64>().sqrt();
            let e = res.eta.values()[flat];
            if r <= 0.4 {
                assert_eq!(e, 1.0);
            } else if r >= 0.9 {
                assert_eq!(e, 0.0);
            } else {
                assert!((0.0..=1.0).contains(&e));
            }
        }
    }

    #[test]
    fn hole_filling_theta_zero() {
        let (c, bound) = hole_filling_bound(0.0, 2.0, 3.0, 1.5, 0.5, 1.0).unwrap();
        assert!((c - 2.0f64.powf(1.5)).abs() < 1e-14);
        assert!((bound - c * (0.5f64.powf(-1.5) * 2.0 + 3.0)).abs() < 1e-12);
        let (_, zero) = hole_filling_bound(0.3, 0.0, 0.0, 2.0, 0.5, 1.0).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn hole_filling_checker() {
        // Z(t) = A (t - rho0)^{-alpha} with rho0 <= 2 rho - sigma satisfies
        // the hypothesis with theta = 0, B = 0
        let (a, alpha, rho0) = (2.0, 1.5, 0.5);
        let samples: Vec<(f64, f64)> = (0..=20)
            .map(|i| {
                let t = 1.0 + 0.5 * i as f64 / 20.0;
                (t, a * (t - rho0).powf(-alpha))
            })
            .collect();
        let rep = hole_filling_check(&samples, 0.0, a, 0.0, alpha).unwrap();
        assert!(rep.hypothesis_ok);
        assert!(rep.conclusion_ok);
        // a violating Z: constant far above the admissible envelope
        let bad: Vec<(f64, f64)> = (0..=10)
            .map(|i| (1.0 + 0.5 * i as f64 / 10.0, 1e6))
            .collect();
        let rep = hole_filling_check(&bad, 0.0, a, 0.0, alpha).unwrap();
        assert!(!rep.hypothesis_ok);
    }

    #[test]
    fn exponents_reference_point() {
        let e = theorem_exponents(4, 2.0, 2.5, 0.1).unwrap();
        assert!((e.gamma - 0.6875).abs() < 1e-14);
        assert!((e.gamma_tilde - 0.5625).abs() < 1e-14);
        assert!((e.alpha_n - 0.8).abs() < 1e-14);
        assert!((e.beta_n - 8.0 / 7.0).abs() < 1e-14);
        assert!((e.m - 0.75).abs() < 1e-14);
        assert!(e.admissible());
    }

    #[test]
    fn exponents_equal_growth() {
        for n in [3, 4, 5, 7] {
            for p in [1.5, 2.0, 3.0] {
                let e = theorem_exponents(n, p, p, 0.2).unwrap();
                let mx = 0.2f64.max((n as f64 - 3.0) / 2.0);
                assert!((e.gamma - p / (2.0 * p)).abs() < 1e-14, "{mx}");
                assert!((e.gamma_tilde - 1.0 / p).abs() < 1e-14);
                assert!(e.pq_ok && e.pqrhs_ok && e.kappa_ok);
            }
        }
    }

    #[test]
    fn exponent_identities_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut count = 0;
        while count < 200 {
            let n = rng.gen_range(4usize..=8);
            let p = rng.gen_range(1.2f64..4.0);
            let nf = n as f64;
            let cap = 1.0 + (2.0 / (nf - 1.0)).min(4.0 * (p - 1.0) / (p * (nf - 3.0)));
            let q = p * rng.gen_range(1.0f64..cap);
            let kappa = rng.gen_range(0.01f64..0.49);
            let e = theorem_exponents(n, p, q, kappa).unwrap();
            if !(e.gamma < 1.0 && e.gamma_tilde < 1.0) {
                continue;
            }
            assert!((e.alpha_n * 2.0 * p * (1.0 - e.gamma) - 1.0).abs() <= 1e-12);
            assert!((e.beta_n * p * (1.0 - e.gamma_tilde) - 1.0).abs() <= 1e-12);
            // closed forms in (n, p, q)
            let alt = 2.0 / ((nf + 1.0) * p - (nf - 1.0) * q);
            assert!((e.alpha_n - alt).abs() <= 1e-10 * alt.abs());
            count += 1;
        }
    }

    #[test]
    fn pqrhs_implies_gamma_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(4usize..=8);
            let p = rng.gen_range(1.2f64..4.0);
            let q = p * rng.gen_range(1.0f64..1.8);
            let kappa = rng.gen_range(0.01f64..0.49);
            let e = theorem_exponents(n, p, q, kappa).unwrap();
            let nf = n as f64;
            if e.pq_ok {
                assert!(e.gamma < 1.0, "n={n} p={p} q={q}");
            }
            if q / p < 1.0 + 4.0 * (p - 1.0) / (p * (nf - 3.0)) {
                assert!(e.gamma_tilde < 1.0, "n={n} p={p} q={q}");
            }
        }
    }

    #[test]
    fn remark_thresholds_n3() {
        // n = 3: max(kappa, 0) = kappa and the thresholds of the remark
        let (p, q) = (2.0, 2.5);
        let t1 = (2.0 * p - q) / (q - p);
        let t2 = 2.0 * (p - 1.0) / (q - p);
        assert_eq!(t1, 3.0);
        assert_eq!(t2, 4.0);
        let e = theorem_exponents(3, p, q, 0.2).unwrap();
        assert!(e.gamma < 1.0 && e.gamma_tilde < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = rng.gen_range(1.2f64..4.0);
            let q = p * rng.gen_range(1.0f64..1.9);
            let kappa = rng.gen_range(0.01f64..0.49);
            let e = theorem_exponents(3, p, q, kappa).unwrap();
            if q > p && kappa < (2.0 * p - q) / (q - p) {
                assert!(e.gamma < 1.0);
            }
            if q > p && kappa < 2.0 * (p - 1.0) / (q - p) {
                assert!(e.gamma_tilde < 1.0);
            }
        }
    }

    #[test]
    fn sphere_constant_estimation() {
        let g = Grid::new(3, 1.0, 1.0 / 24.0).unwrap();
        let ts = 6.0;
        let lib = zonal_profile_library();
        let c = estimate_sphere_sobolev_constant(&g, ts, 0.75, &lib).unwrap();
        // the constant profile is admissible: ratio |S_r|^{1/2* - 1/2}
        let ones = ScalarField::constant(g.clone(), 1.0).unwrap();
        let area = ones.sphere_integral(0.75).unwrap();
        let const_ratio = area.powf(1.0 / ts - 0.5);
        assert!(c >= const_ratio);
        // doubling the library never decreases the estimate
        let small = &lib[..3];
        let c_small = estimate_sphere_sobolev_constant(&g, ts, 0.75, small).unwrap();
        assert!(c >= c_small);
        // scale covariance in r with exponent (n-1)(1/2* - 1/2)
        let c_half = estimate_sphere_sobolev_constant(&g, ts, 0.5, &lib).unwrap();
        let predicted = c * (0.5f64 / 0.75).powf(2.0 * (1.0 / ts - 0.5));
        assert!(
            (c_half - predicted).abs() < 0.05 * predicted,
            "{c_half} vs {predicted}"
        );
    }

    #[test]
    fn structural_constant_defaults() {
        // gamma function sanity: Gamma(n) = (n-1)!
        assert!((gamma_fn(4.0) - 6.0).abs() < 1e-10);
        assert!((gamma_fn(1.5) - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // ball volumes
        assert!((ball_volume(2) - std::f64::consts::PI).abs() < 1e-14);
        assert!((ball_volume(3) - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        // Talenti constant for n = 3: (4 pi)^{-1/3} * (something near 0.43)
        let s3 = sobolev_embedding_constant(3);
        assert!(s3 > 0.3 && s3 < 0.6, "{s3}");
        assert!(c2_default(3).unwrap() >= 1.0);
        assert!(c1_from_sphere_constant(1.4, 6.0) >= 1.0);
        assert!((c1_from_sphere_constant(1.4, 6.0) - 1.4f64.powi(3)).abs() < 1e-12);
    }
}
