//! The radial two-term (p,q) model integrand, growth envelopes, the
//! excess function `G_T`, and the mollify-and-glue regularization
//! `F_eps = Ftilde_eps + eps * L_p`.
//!
//! The model family `F(z) = c_p (mu^2+|z|^2)^{p/2} + c_q (mu^2+|z|^2)^{q/2}`
//! is radial, so Hessians are analytic and the mollification reduces to a
//! 1-D convolution of the radial profile.

use nalgebra::DMatrix;

use crate::grid::ScalarField;
use crate::{Error, Result};

/// Ellipticity/growth parameters: `0 < nu <= Lambda`, `1 < p <= q`, `mu in [0,1]`.
#[derive(Debug, Clone, Copy)]
pub struct PQParams {
    pub nu: f64,
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    pub mu: f64,
}

impl PQParams {
    pub fn new(nu: f64, lambda: f64, p: f64, q: f64, mu: f64) -> Result<Self> {
        if !(nu > 0.0 && lambda >= nu) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < nu <= Lambda, got nu = {nu}, Lambda = {lambda}"
            )));
        }
        if !(1.0 < p && p <= q) {
            return Err(Error::InvalidParameter(format!(
                "need 1 < p <= q, got p = {p}, q = {q}"
            )));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidParameter(format!(
                "need mu in [0,1], got {mu}"
            )));
        }
        Ok(Self {
            nu,
            lambda,
            p,
            q,
            mu,
        })
    }
}

/// `F(z) = c_p (mu^2+|z|^2)^{p/2} + c_q (mu^2+|z|^2)^{q/2}`.
#[derive(Debug, Clone, Copy)]
pub struct ModelIntegrand {
    pub params: PQParams,
    pub cp: f64,
    pub cq: f64,
}

impl ModelIntegrand {
    pub fn new(params: PQParams, cp: f64, cq: f64) -> Result<Self> {
        if cp < 0.0 || cq < 0.0 || cp + cq == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need cp, cq >= 0 and not both zero, got cp = {cp}, cq = {cq}"
            )));
        }
        Ok(Self { params, cp, cq })
    }

    /// Radial profile in `t = mu^2 + |z|^2`: `phi(t) = cp t^{p/2} + cq t^{q/2}`.
    fn phi(&self, t: f64) -> f64 {
        self.cp * t.powf(self.params.p / 2.0) + self.cq * t.powf(self.params.q / 2.0)
    }

    fn phi_d1(&self, t: f64) -> f64 {
        let (p, q) = (self.params.p, self.params.q);
        // skip vanishing coefficients before t.powf: 0 * inf is NaN at t = 0
        let mut s = 0.0;
        let ap = self.cp * (p / 2.0);
        if ap != 0.0 {
            s += ap * t.powf(p / 2.0 - 1.0);
        }
        let aq = self.cq * (q / 2.0);
        if aq != 0.0 {
            s += aq * t.powf(q / 2.0 - 1.0);
        }
        s
    }

    fn phi_d2(&self, t: f64) -> f64 {
        let (p, q) = (self.params.p, self.params.q);
        let mut s = 0.0;
        let ap = self.cp * (p / 2.0) * (p / 2.0 - 1.0);
        if ap != 0.0 {
            s += ap * t.powf(p / 2.0 - 2.0);
        }
        let aq = self.cq * (q / 2.0) * (q / 2.0 - 1.0);
        if aq != 0.0 {
            s += aq * t.powf(q / 2.0 - 2.0);
        }
        s
    }

    /// True when `F` is `C^2` everywhere (no singular origin).
    pub fn is_smooth(&self) -> bool {
        self.params.mu > 0.0 || self.params.p >= 2.0
    }

    fn t_of(&self, z: &[f64]) -> f64 {
        self.params.mu * self.params.mu + z.iter().map(|zi| zi * zi).sum::<f64>()
    }

    pub fn eval_f(&self, z: &[f64]) -> f64 {
        self.phi(self.t_of(z))
    }

    /// Radial profile as a function of `r = |z|`: `f(r) = F(r e_1)`.
    pub fn radial_f(&self, r: f64) -> f64 {
        self.phi(self.params.mu * self.params.mu + r * r)
    }

    /// `d/dr F(r e_1)`.
    pub fn radial_df(&self, r: f64) -> f64 {
        2.0 * r * self.phi_d1(self.params.mu * self.params.mu + r * r)
    }

    /// `d^2/dr^2 F(r e_1)`; singular at `r = 0` when `mu = 0` and `p < 2`.
    pub fn radial_d2f(&self, r: f64) -> f64 {
        let t = self.params.mu * self.params.mu + r * r;
        2.0 * self.phi_d1(t) + 4.0 * r * r * self.phi_d2(t)
    }

    /// Gradient `2 phi'(t) z`.
    pub fn eval_df(&self, z: &[f64]) -> Result<Vec<f64>> {
        let t = self.t_of(z);
        if t == 0.0 {
            // F(z) ~ |z|^p near 0 with p > 1, so the gradient vanishes
            return Ok(vec![0.0; z.len()]);
        }
        let c = 2.0 * self.phi_d1(t);
        Ok(z.iter().map(|&zi| c * zi).collect())
    }

    /// Hessian `2 phi'(t) I + 4 phi''(t) z (x) z`.
    pub fn eval_d2f(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let n = z.len();
        let r2: f64 = z.iter().map(|zi| zi * zi).sum();
        if self.params.mu == 0.0 && r2 == 0.0 {
            if self.params.p < 2.0 {
                return Err(Error::SingularOrigin);
            }
            // p >= 2: phi'(0) finite (nonzero only for p = 2), rank-one term vanishes
            let c = 2.0 * self.phi_d1(0.0);
            return Ok(DMatrix::identity(n, n) * c);
        }
        let t = self.t_of(z);
        let a = 2.0 * self.phi_d1(t);
        let b = 4.0 * self.phi_d2(t);
        let mut m = DMatrix::identity(n, n) * a;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += b * z[i] * z[j];
            }
        }
        Ok(m)
    }

    /// Hessian eigenvalues: tangential `2 phi'` ((n-1)-fold) and radial
    /// `2 phi' + 4 phi'' |z|^2`.
    pub fn hessian_eigs(&self, z: &[f64]) -> Result<(f64, f64)> {
        let r2: f64 = z.iter().map(|zi| zi * zi).sum();
        if self.params.mu == 0.0 && r2 == 0.0 && self.params.p < 2.0 {
            return Err(Error::SingularOrigin);
        }
        let t = self.t_of(z);
        let tan = 2.0 * self.phi_d1(t);
        let rad = tan + 4.0 * self.phi_d2(t) * r2;
        Ok((tan, rad))
    }
}

/// Margins for the three growth/ellipticity inequalities, evaluated sample-wise.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    /// Worst slack in `nu (mu^2+|z|^2)^{p/2} <= F <= Lambda(...)^{q/2} + Lambda(...)^{p/2}`
    /// (minimum of both one-sided relative margins).
    pub growth_margin: f64,
    /// Worst slack in `|d2F| <= Lambda(...)^{(q-2)/2} + Lambda(...)^{(p-2)/2}`.
    pub hessian_upper_margin: f64,
    /// Worst slack in `<d2F xi, xi> >= nu(...)^{(p-2)/2} |xi|^2`.
    pub ellipticity_margin: f64,
    pub violations: usize,
    pub pass: bool,
}

/// Check all three lines of the growth assumption at the given `(z, xi)` samples.
pub fn verify_assumption(
    integrand: &ModelIntegrand,
    params: &PQParams,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> Result<AssumptionReport> {
    let mut growth_margin = f64::INFINITY;
    let mut hessian_upper_margin = f64::INFINITY;
    let mut ellipticity_margin = f64::INFINITY;
    let mut violations = 0usize;
    for (z, xi) in samples {
        let t = params.mu * params.mu + z.iter().map(|zi| zi * zi).sum::<f64>();
        if t == 0.0 {
            return Err(Error::SingularOrigin);
        }
        let f = integrand.eval_f(z);
        let lower = params.nu * t.powf(params.p / 2.0);
        let upper =
            params.lambda * t.powf(params.q / 2.0) + params.lambda * t.powf(params.p / 2.0);
        let scale = f.abs().max(1e-300);
        let g = ((f - lower) / scale).min((upper - f) / scale);
        growth_margin = growth_margin.min(g);

        let (tan, rad) = integrand.hessian_eigs(z)?;
        let op_norm = tan.abs().max(rad.abs());
        let h_upper = params.lambda * t.powf((params.q - 2.0) / 2.0)
            + params.lambda * t.powf((params.p - 2.0) / 2.0);
        let hm = (h_upper - op_norm) / h_upper.max(1e-300);
        hessian_upper_margin = hessian_upper_margin.min(hm);

        let xi2: f64 = xi.iter().map(|x| x * x).sum();
        if xi2 > 0.0 {
            let d2 = integrand.eval_d2f(z)?;
            let mut quad = 0.0;
            for i in 0..z.len() {
                for j in 0..z.len() {
                    quad += d2[(i, j)] * xi[i] * xi[j];
                }
            }
            let bound = params.nu * t.powf((params.p - 2.0) / 2.0) * xi2;
            let em = (quad - bound) / quad.abs().max(bound.abs()).max(1e-300);
            ellipticity_margin = ellipticity_margin.min(em);
        }
        if g < -1e-12 {
            violations += 1;
        }
    }
    let tol = -1e-12;
    let pass = growth_margin >= tol && hessian_upper_margin >= tol && ellipticity_margin >= tol;
    if !pass {
        violations = violations.max(1);
    }
    Ok(AssumptionReport {
        growth_margin,
        hessian_upper_margin,
        ellipticity_margin,
        violations,
        pass,
    })
}

/// Growth envelope pair `g_1 <= g_{2,eps}` together with the threshold `T`.
#[derive(Debug, Clone, Copy)]
pub struct GrowthEnvelope {
    pub params: PQParams,
    pub eps: f64,
    pub t_cut: f64,
}

impl GrowthEnvelope {
    pub fn new(params: PQParams, eps: f64, t_cut: f64) -> Result<Self> {
        if !(t_cut > 0.0 && t_cut <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need T in (0,1], got {t_cut}"
            )));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "need eps in [0,1], got {eps}"
            )));
        }
        Ok(Self {
            params,
            eps,
            t_cut,
        })
    }

    /// `g_1(s) = nu (mu^2+s^2)^{(p-2)/2}`.
    pub fn g1(&self, s: f64) -> Result<f64> {
        let m2 = self.params.mu * self.params.mu + s * s;
        if m2 == 0.0 && self.params.p < 2.0 {
            return Err(Error::SingularOrigin);
        }
        Ok(self.params.nu * m2.powf((self.params.p - 2.0) / 2.0))
    }

    /// `g_{2,eps}(s) = Lambda(mu^2+s^2)^{(p-2)/2} + Lambda(mu^2+s^2)^{(q-2)/2}
    ///  + eps Lambda (1+s^2)^{min(p-2,0)/2}`.
    pub fn g2eps(&self, s: f64) -> Result<f64> {
        let m2 = self.params.mu * self.params.mu + s * s;
        if m2 == 0.0 && self.params.p < 2.0 {
            return Err(Error::SingularOrigin);
        }
        let pq = &self.params;
        Ok(pq.lambda * m2.powf((pq.p - 2.0) / 2.0)
            + pq.lambda * m2.powf((pq.q - 2.0) / 2.0)
            + self.eps * pq.lambda * (1.0 + s * s).powf((pq.p - 2.0).min(0.0) / 2.0))
    }

    /// `G_T(t) = int_T^{max(t,T)} g_1(s) s ds`, in closed form
    /// `(nu/p)[(mu^2+t^2)^{p/2} - (mu^2+T^2)^{p/2}]` for `t >= T`, else 0.
    pub fn g_cap(&self, t: f64) -> f64 {
        if t <= self.t_cut {
            return 0.0;
        }
        let pq = &self.params;
        let mt = pq.mu * pq.mu + t * t;
        let m_cut = pq.mu * pq.mu + self.t_cut * self.t_cut;
        pq.nu / pq.p * (mt.powf(pq.p / 2.0) - m_cut.powf(pq.p / 2.0))
    }

    /// Inverse of `G_T` on `[T, infinity)`: the `t >= T` with `g_cap(t) = y`.
    pub fn g_cap_inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "G_T inverse needs y >= 0, got {y}"
            )));
        }
        let pq = &self.params;
        let m_cut = pq.mu * pq.mu + self.t_cut * self.t_cut;
        let mt = (y * pq.p / pq.nu + m_cut.powf(pq.p / 2.0)).powf(2.0 / pq.p);
        Ok((mt - pq.mu * pq.mu).max(self.t_cut * self.t_cut).sqrt())
    }
}

/// Outcome of checking the two envelope/excess inequalities on a log grid.
#[derive(Debug, Clone, Copy)]
pub struct RatioBoundReport {
    /// Explicit constant assembled from the proof.
    pub c1_formula: f64,
    /// Smallest constant making both inequalities hold on the sampled grid.
    pub c1_empirical: f64,
    pub pass: bool,
}

/// Verify `g2/g1 <= c1 (G_T^{(q-p)/p} + 1 + eps (mu^2+T^2)^{-(p-2)/2})`
/// and `t <= c1 G_T^{1/p} + (mu^2+T^2)^{1/2}` on a log-spaced grid in
/// `[T, t_max]`.
pub fn ratio_bound_check(env: &GrowthEnvelope, t_max: f64, points: usize) -> Result<RatioBoundReport> {
    if t_max < env.t_cut || points < 2 {
        return Err(Error::InvalidParameter(
            "ratio_bound_check needs t_max >= T and >= 2 points".into(),
        ));
    }
    let pq = &env.params;
    let theta = (pq.q - pq.p) / pq.p;
    let m2t = pq.mu * pq.mu + env.t_cut * env.t_cut;
    let eps_weight = m2t.powf(-(pq.p - 2.0) / 2.0);
    let ln = pq.lambda / pq.nu;
    // Subadditivity split (a+b)^theta <= m (a^theta + b^theta), m = max(1, 2^{theta-1}).
    let m = 1.0f64.max(2.0f64.powf(theta - 1.0));
    let c_coef = ln * (pq.p / pq.nu).powf(theta) * m;
    let c_const = ln * (1.0 + m * m2t.powf(pq.p * theta / 2.0)) + ln * env.eps;
    let c_eps = ln;
    let c_second = (pq.p / pq.nu).powf(1.0 / pq.p);
    let c1_formula = 1.0f64.max(c_coef).max(c_const).max(c_eps).max(c_second);

    let mut c1_empirical = 0.0f64;
    let lo = env.t_cut.ln();
    let hi = t_max.ln();
    for i in 0..points {
        let t = (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp();
        let g = env.g_cap(t);
        let rhs1 = g.powf(theta) + 1.0 + env.eps * eps_weight;
        let r1 = env.g2eps(t)? / env.g1(t)? / rhs1;
        let r2 = if g > 0.0 {
            (t - m2t.sqrt()).max(0.0) / g.powf(1.0 / pq.p)
        } else {
            0.0 // t = T: the sqrt term alone covers t
        };
        c1_empirical = c1_empirical.max(r1).max(r2);
    }
    Ok(RatioBoundReport {
        c1_formula,
        c1_empirical,
        pass: c1_empirical <= c1_formula * (1.0 + 1e-12),
    })
}

// ---------------------------------------------------------------------------
// Regularization F_eps = Ftilde_eps + eps L_p
// ---------------------------------------------------------------------------

const MOLLIFY_PANELS: usize = 4096;

/// 1-D bump `psi(u) = C exp(-1/(1-u^2))` on `(-1,1)`, `int psi = 1`.
fn bump_norm() -> f64 {
    let mut s = 0.0;
    let du = 2.0 / MOLLIFY_PANELS as f64;
    for i in 0..MOLLIFY_PANELS {
        let u = -1.0 + (i as f64 + 0.5) * du;
        s += (-1.0 / (1.0 - u * u)).exp() * du;
    }
    1.0 / s
}

/// Mollified radial profile `fhat(r) = int f(|r - eps u|) psi(u) du` for the
/// singular case `mu = 0`, `p < 2`, with derivatives obtained without ever
/// touching `f''` (which blows up at 0):
/// `fhat' = int sgn(r-eps u) f'(|r-eps u|) psi(u) du`,
/// `fhat'' = (1/eps) int sgn(r-eps u) f'(|r-eps u|) psi'(u) du`.
#[derive(Debug, Clone)]
struct MollifiedProfile {
    base: ModelIntegrand,
    eps: f64,
    norm: f64,
}

impl MollifiedProfile {
    fn new(base: ModelIntegrand, eps: f64) -> Self {
        Self {
            base,
            eps,
            norm: bump_norm(),
        }
    }

    fn quad(&self, r: f64, deriv_weight: bool) -> f64 {
        let du = 2.0 / MOLLIFY_PANELS as f64;
        let mut s = 0.0;
        for i in 0..MOLLIFY_PANELS {
            let u = -1.0 + (i as f64 + 0.5) * du;
            let bump = (-1.0 / (1.0 - u * u)).exp();
            let w = if deriv_weight {
                // psi'(u)/C = exp(-1/(1-u^2)) * (-2u/(1-u^2)^2)
                bump * (-2.0 * u / ((1.0 - u * u) * (1.0 - u * u)))
            } else {
                bump
            };
            let x = r - self.eps * u;
            let g = x.signum() * self.base.radial_df(x.abs());
            s += w * g * du;
        }
        self.norm * s
    }

    fn fhat(&self, r: f64) -> f64 {
        let du = 2.0 / MOLLIFY_PANELS as f64;
        let mut s = 0.0;
        for i in 0..MOLLIFY_PANELS {
            let u = -1.0 + (i as f64 + 0.5) * du;
            let bump = (-1.0 / (1.0 - u * u)).exp();
            let x = (r - self.eps * u).abs();
            s += bump * self.base.radial_f(x) * du;
        }
        self.norm * s
    }

    fn fhat_d1(&self, r: f64) -> f64 {
        self.quad(r, false)
    }

    fn fhat_d2(&self, r: f64) -> f64 {
        self.quad(r, true) / self.eps
    }
}

/// Quintic smoothstep glue: 1 below `T/4`, 0 above `T/3`.
#[derive(Debug, Clone, Copy)]
struct Glue {
    a: f64,
    b: f64,
}

impl Glue {
    fn rho(&self, r: f64) -> f64 {
        if r <= self.a {
            1.0
        } else if r >= self.b {
            0.0
        } else {
            let x = (r - self.a) / (self.b - self.a);
            1.0 - x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        }
    }

    fn rho_d1(&self, r: f64) -> f64 {
        if r <= self.a || r >= self.b {
            0.0
        } else {
            let w = self.b - self.a;
            let x = (r - self.a) / w;
            -30.0 * x * x * (1.0 - x) * (1.0 - x) / w
        }
    }

    fn rho_d2(&self, r: f64) -> f64 {
        if r <= self.a || r >= self.b {
            0.0
        } else {
            let w = self.b - self.a;
            let x = (r - self.a) / w;
            -(60.0 * x - 180.0 * x * x + 120.0 * x * x * x) / (w * w)
        }
    }
}

/// `F_eps = Ftilde_eps + eps L_p`: equals `F + eps L_p` outside `B_{T/3}`,
/// `C^2` and convex everywhere (checked on a net at construction).
#[derive(Debug, Clone)]
pub struct RegularizedIntegrand {
    base: ModelIntegrand,
    eps: f64,
    t_cut: f64,
    profile: Option<MollifiedProfile>,
    glue: Glue,
    min_hessian_eig: f64,
}

/// Convexity / closeness summary produced at construction.
#[derive(Debug, Clone, Copy)]
pub struct RegularizationReport {
    /// Minimal radial Hessian eigenvalue of `Ftilde_eps` plus the `eps L_p`
    /// term on the check net in `B_{2T}`.
    pub min_hessian_eig: f64,
    /// `sup_{|z| <= T} |Ftilde_eps - F|` on the net.
    pub sup_deviation: f64,
}

const CONVEXITY_NET: usize = 10_000;

impl RegularizedIntegrand {
    /// Mollify-and-glue when `F` is singular at the origin, otherwise
    /// `Ftilde_eps = F` exactly. Fails when the glued integrand is not
    /// convex on the check net (`eps` too large).
    pub fn new(base: ModelIntegrand, eps: f64, t_cut: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need eps in (0,1], got {eps}"
            )));
        }
        if !(t_cut > 0.0 && t_cut <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need T in (0,1], got {t_cut}"
            )));
        }
        let profile = if base.is_smooth() {
            None
        } else {
            Some(MollifiedProfile::new(base, eps))
        };
        let glue = Glue {
            a: t_cut / 4.0,
            b: t_cut / 3.0,
        };
        let mut me = Self {
            base,
            eps,
            t_cut,
            profile,
            glue,
            min_hessian_eig: f64::INFINITY,
        };
        let min_eig = me.min_hessian_eig_on_net()?;
        if min_eig <= 0.0 {
            return Err(Error::NotConvex { eps, min_eig });
        }
        me.min_hessian_eig = min_eig;
        Ok(me)
    }

    pub fn base(&self) -> &ModelIntegrand {
        &self.base
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn t_cut(&self) -> f64 {
        self.t_cut
    }

    /// Radial value of `Ftilde_eps` at `r = |z|`.
    fn tilde_radial(&self, r: f64) -> f64 {
        match &self.profile {
            None => self.base.radial_f(r),
            Some(prof) => {
                if r >= self.glue.b {
                    self.base.radial_f(r)
                } else {
                    let rho = self.glue.rho(r);
                    rho * prof.fhat(r) + (1.0 - rho) * self.base.radial_f(r)
                }
            }
        }
    }

    /// First radial derivative of `Ftilde_eps`.
    fn tilde_radial_d1(&self, r: f64) -> f64 {
        match &self.profile {
            None => self.base.radial_df(r),
            Some(prof) => {
                if r >= self.glue.b {
                    self.base.radial_df(r)
                } else {
                    let rho = self.glue.rho(r);
                    let rho1 = self.glue.rho_d1(r);
                    let diff = prof.fhat(r) - self.base.radial_f(r);
                    rho1 * diff + rho * prof.fhat_d1(r) + (1.0 - rho) * self.base.radial_df(r)
                }
            }
        }
    }

    /// Second radial derivative of `Ftilde_eps`. `f''` of the base profile
    /// is only touched where `rho < 1`, i.e. `r > T/4 > 0`.
    fn tilde_radial_d2(&self, r: f64) -> f64 {
        match &self.profile {
            None => self.base.radial_d2f(r),
            Some(prof) => {
                if r >= self.glue.b {
                    self.base.radial_d2f(r)
                } else if r <= self.glue.a {
                    prof.fhat_d2(r)
                } else {
                    let rho = self.glue.rho(r);
                    let rho1 = self.glue.rho_d1(r);
                    let rho2 = self.glue.rho_d2(r);
                    let diff = prof.fhat(r) - self.base.radial_f(r);
                    let diff1 = prof.fhat_d1(r) - self.base.radial_df(r);
                    rho2 * diff + 2.0 * rho1 * diff1 + rho * prof.fhat_d2(r)
                        + (1.0 - rho) * self.base.radial_d2f(r)
                }
            }
        }
    }

    fn lp_value(&self, r2: f64) -> f64 {
        if self.base.params.p >= 2.0 {
            r2 / 2.0
        } else {
            (1.0 + r2).powf(self.base.params.p / 2.0) - 1.0
        }
    }

    /// Radial derivative pair `(L_p'(r), L_p''(r))` of the `eps`-term.
    fn lp_radial_derivs(&self, r: f64) -> (f64, f64) {
        let p = self.base.params.p;
        if p >= 2.0 {
            (r, 1.0)
        } else {
            let t = 1.0 + r * r;
            let d1 = p * t.powf(p / 2.0 - 1.0) * r;
            let d2 = p * t.powf(p / 2.0 - 1.0) + p * (p - 2.0) * t.powf(p / 2.0 - 2.0) * r * r;
            (d1, d2)
        }
    }

    /// `F_eps(z) = Ftilde_eps(z) + eps L_p(z)`.
    pub fn eval_f(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|zi| zi * zi).sum();
        self.tilde_radial(r2.sqrt()) + self.eps * self.lp_value(r2)
    }

    /// `Ftilde_eps(z)` alone.
    pub fn eval_tilde_f(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|zi| zi * zi).sum();
        self.tilde_radial(r2.sqrt())
    }

    /// Gradient of `F_eps`.
    pub fn eval_df(&self, z: &[f64]) -> Vec<f64> {
        let r2: f64 = z.iter().map(|zi| zi * zi).sum();
        let r = r2.sqrt();
        if r < 1e-14 {
            return vec![0.0; z.len()];
        }
        let w1 = self.tilde_radial_d1(r) + self.eps * self.lp_radial_derivs(r).0;
        z.iter().map(|&zi| w1 / r * zi).collect()
    }

    /// Hessian of `F_eps`: `w'' rhat(x)rhat + (w'/r)(I - rhat(x)rhat)`.
    pub fn eval_d2f(&self, z: &[f64]) -> DMatrix<f64> {
        let n = z.len();
        let r2: f64 = z.iter().map(|zi| zi * zi).sum();
        let r = r2.sqrt();
        if r < 1e-14 {
            // even smooth radial profile: Hessian = w''(0) I
            let w2 = self.tilde_radial_d2(0.0) + self.eps * self.lp_radial_derivs(0.0).1;
            return DMatrix::identity(n, n) * w2;
        }
        let (l1, l2) = self.lp_radial_derivs(r);
        let w1 = self.tilde_radial_d1(r) + self.eps * l1;
        let w2 = self.tilde_radial_d2(r) + self.eps * l2;
        let tangential = w1 / r;
        let mut m = DMatrix::identity(n, n) * tangential;
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += (w2 - tangential) * z[i] / r * z[j] / r;
            }
        }
        m
    }

    /// Minimal radial Hessian eigenvalue (`w''` or `w'/r`) of `F_eps` on a
    /// deterministic net of radii in `B_{2T}`.
    fn min_hessian_eig_on_net(&self) -> Result<f64> {
        let mut min_eig = f64::INFINITY;
        for i in 1..=CONVEXITY_NET {
            let r = 2.0 * self.t_cut * i as f64 / CONVEXITY_NET as f64;
            let (l1, l2) = self.lp_radial_derivs(r);
            let w1 = self.tilde_radial_d1(r) + self.eps * l1;
            let w2 = self.tilde_radial_d2(r) + self.eps * l2;
            min_eig = min_eig.min(w2).min(w1 / r);
            if !min_eig.is_finite() {
                return Err(Error::Internal(format!(
                    "non-finite Hessian eigenvalue at r = {r}"
                )));
            }
        }
        Ok(min_eig)
    }

    /// Convexity and closeness summary (net-sampled).
    pub fn report(&self) -> RegularizationReport {
        let mut sup = 0.0f64;
        for i in 0..=CONVEXITY_NET {
            let r = self.t_cut * i as f64 / CONVEXITY_NET as f64;
            sup = sup.max((self.tilde_radial(r) - self.base.radial_f(r)).abs());
        }
        RegularizationReport {
            min_hessian_eig: self.min_hessian_eig,
            sup_deviation: sup,
        }
    }
}

/// Largest `eps` in `(0, 1]` (up to bisection tolerance) for which the
/// regularization passes the net convexity check.
pub fn find_eps0(base: ModelIntegrand, t_cut: f64) -> Result<f64> {
    let passes = |eps: f64| RegularizedIntegrand::new(base, eps, t_cut).is_ok();
    if passes(1.0) {
        return Ok(1.0);
    }
    let mut lo = 1e-8;
    if !passes(lo) {
        return Err(Error::NoConvergence(
            "no convex regularization found down to eps = 1e-8".into(),
        ));
    }
    let mut hi = 1.0;
    for _ in 0..40 {
        let mid = (lo * hi).sqrt();
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Truncated forcing `f_m = min(max(f, -m), m)`.
pub fn truncate_forcing(f: &ScalarField, m: f64) -> Result<ScalarField> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "truncation level must be positive, got {m}"
        )));
    }
    Ok(f.clamp_abs(m))
}
