//! Residuals of the harmonic-curvature equations and homothety invariants.
//!
//! Every characterization is evaluated on raw node vectors internally so
//! the continuation code can call the same kernels on reduced vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SignRule};
use crate::geometry::{curvature_raw, integrate_raw, ScalarField, SurfaceDescriptor, ZonalScheme};
use crate::tolerances::{grid_tolerance, ALGEBRAIC, NEWTON_TOL, NONCONSTANT_K};

/// Tolerance on PDE residuals for the Legendre scheme, whose error is
/// spectrally small once the branch is resolved.
pub const SPECTRAL_GRID_TOL: f64 = 1e-8;

/// The scalars of one problem instance on the trivial curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpParams {
    pub p: u32,
    pub r: f64,
    pub khat: f64,
    /// Selected eigenvalue.
    pub lambda: f64,
    /// Base offset δ(λ).
    pub delta: f64,
    /// Branch parameter.
    pub t: f64,
    /// θ = δ + t.
    pub theta: f64,
    pub eps: f64,
    pub c: f64,
    pub a: f64,
    pub q: f64,
    /// Scalar curvature of the product metric.
    pub mu: f64,
}

pub fn eps_of_theta(p: u32, r: f64, khat: f64, theta: f64) -> f64 {
    let p = p as f64;
    2.0 * (p - 1.0 / p) * r * theta - (p - 1.0) * khat
}

pub fn c_of_theta(p: u32, r: f64, khat: f64, theta: f64) -> f64 {
    let pf = p as f64;
    0.25 * pf * (2.0 * (pf - 1.0) * r * theta - (pf - 2.0) * khat) * theta.powf(2.0 / (pf - 1.0))
}

pub fn a_of_eps(p: u32, eps: f64) -> f64 {
    let p = p as f64;
    p * (p - 2.0) * eps / (4.0 * (p - 1.0))
}

/// Λ(θ) = 2(p − 1/p)rθ − (p − 2)K̂, the eigenvalue that makes the
/// trivial linearization singular at θ.
pub fn lambda_of_theta(p: u32, r: f64, khat: f64, theta: f64) -> f64 {
    let p = p as f64;
    2.0 * (p - 1.0 / p) * r * theta - (p - 2.0) * khat
}

/// Inverse of [`lambda_of_theta`].
pub fn theta_of_lambda(p: u32, r: f64, khat: f64, lambda: f64) -> f64 {
    let pf = p as f64;
    pf * (lambda + (pf - 2.0) * khat) / (2.0 * (pf * pf - 1.0) * r)
}

/// θ-derivatives of (ε, c, a) along the trivial curve.
pub(crate) fn trivial_derivatives(p: u32, r: f64, khat: f64, theta: f64) -> (f64, f64, f64) {
    let pf = p as f64;
    let de = 2.0 * (pf - 1.0 / pf) * r;
    let e = 2.0 / (pf - 1.0);
    let lin = 2.0 * (pf - 1.0) * r * theta - (pf - 2.0) * khat;
    let dc = 0.25 * pf * (2.0 * (pf - 1.0) * r * theta.powf(e) + lin * e * theta.powf(e - 1.0));
    (de, dc, a_of_eps(p, de))
}

fn validate_core(p: u32, r: f64, khat: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::Constraint(format!("p >= 2 required, got {p}")));
    }
    if !r.is_finite() || r == 0.0 {
        return Err(Error::Constraint("r must be finite and nonzero".into()));
    }
    if !khat.is_finite() || khat == 0.0 {
        return Err(Error::Constraint("khat must be finite and nonzero".into()));
    }
    crate::spectra::check_sign_rule(p, r, khat)
}

impl WarpParams {
    /// The point θ of the trivial curve, with λ = Λ(θ) and t = 0.
    pub fn on_trivial_curve(p: u32, r: f64, khat: f64, theta: f64) -> Result<Self> {
        validate_core(p, r, khat)?;
        let lambda = lambda_of_theta(p, r, khat, theta);
        Self::build(p, r, khat, lambda, theta, 0.0)
    }

    /// Parameters for the λ-branch at branch parameter t.
    pub fn from_lambda(p: u32, r: f64, khat: f64, lambda: f64, t: f64) -> Result<Self> {
        validate_core(p, r, khat)?;
        let delta = theta_of_lambda(p, r, khat, lambda);
        Self::build(p, r, khat, lambda, delta, t)
    }

    fn build(p: u32, r: f64, khat: f64, lambda: f64, delta: f64, t: f64) -> Result<Self> {
        let theta = delta + t;
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Domain(format!("theta = {theta} must be positive")));
        }
        let eps = eps_of_theta(p, r, khat, theta);
        let c = c_of_theta(p, r, khat, theta);
        Ok(WarpParams {
            p,
            r,
            khat,
            lambda,
            delta,
            t,
            theta,
            eps,
            c,
            a: a_of_eps(p, eps),
            q: 2.0 + 4.0 / p as f64,
            mu: 4.0 * (1.0 + 1.0 / p as f64) * c,
        })
    }

    /// Same λ-branch at another parameter value.
    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::build(self.p, self.r, self.khat, self.lambda, self.delta, t)
    }

    /// θ ∈ I_r, equivalently ε, c and Λ(θ) all positive.
    pub fn admissible(&self) -> bool {
        self.eps > 0.0 && self.c > 0.0 && lambda_of_theta(self.p, self.r, self.khat, self.theta) > 0.0
    }

    /// Exponent β = p/(2 − 2p) of f = θ^β on the trivial curve.
    pub fn beta(&self) -> f64 {
        let p = self.p as f64;
        p / (2.0 - 2.0 * p)
    }

    /// Constant f on the trivial curve.
    pub fn f_const(&self) -> f64 {
        self.theta.powf(self.beta())
    }

    /// Checks the stored scalars against a recomputation from θ.
    pub fn consistency_error(&self) -> f64 {
        let eps = eps_of_theta(self.p, self.r, self.khat, self.theta);
        let c = c_of_theta(self.p, self.r, self.khat, self.theta);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        rel(self.eps, eps)
            .max(rel(self.c, c))
            .max((self.a - a_of_eps(self.p, self.eps)).abs() / self.eps.abs().max(1.0))
            .max(rel(self.mu, 4.0 * (1.0 + 1.0 / self.p as f64) * self.c))
    }
}

/// One solution (x, f, ε, c).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionQuadruple {
    pub x: ScalarField,
    pub f: ScalarField,
    pub eps: f64,
    pub c: f64,
}

/// Ω(f) = af − cf^{1+4/p} + rf^{−1+2/p}.
pub fn omega_of_f(f: f64, params: &WarpParams) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::Domain(format!("f = {f} must be positive")));
    }
    Ok(omega_raw(f, params))
}

pub(crate) fn omega_raw(f: f64, prm: &WarpParams) -> f64 {
    let p = prm.p as f64;
    prm.a * f - prm.c * f.powf(1.0 + 4.0 / p) + prm.r * f.powf(-1.0 + 2.0 / p)
}

pub(crate) fn omega_prime_raw(f: f64, prm: &WarpParams) -> f64 {
    let p = prm.p as f64;
    prm.a - prm.c * (1.0 + 4.0 / p) * f.powf(4.0 / p) + prm.r * (-1.0 + 2.0 / p) * f.powf(-2.0 + 2.0 / p)
}

/// Intermediate fields of one residual evaluation.
#[derive(Debug, Clone)]
pub(crate) struct LtEval {
    pub curvature: Vec<f64>,
    /// K + ε/(p−1).
    pub shifted: Vec<f64>,
    pub f: Vec<f64>,
    /// e^{−2x}Δ̂f.
    pub lap_f: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Evaluates the residual with the supplied Δ̂ (full or reduced).
pub(crate) fn eval_lt(lap: impl Fn(&[f64]) -> Vec<f64>, prm: &WarpParams, x: &[f64]) -> Result<LtEval> {
    let p = prm.p as f64;
    let lx = lap(x);
    let curvature: Vec<f64> = x.iter().zip(&lx).map(|(xi, l)| (-2.0 * xi).exp() * (prm.khat - l)).collect();
    let shifted: Vec<f64> = curvature.iter().map(|k| k + prm.eps / (p - 1.0)).collect();
    let denom = 2.0 * prm.r * (1.0 + 1.0 / p);
    let bad: Vec<usize> = shifted.iter().enumerate().filter(|(_, w)| !(*w / denom > 0.0)).map(|(i, _)| i).collect();
    if let Some(&first) = bad.first() {
        return Err(Error::OmegaSignChange { nodes: bad, first });
    }
    let beta = prm.beta();
    let f: Vec<f64> = shifted.iter().map(|w| (w / denom).powf(beta)).collect();
    let lf = lap(&f);
    let lap_f: Vec<f64> = lf.iter().zip(x).map(|(l, xi)| (-2.0 * xi).exp() * l).collect();
    let residual = lap_f.iter().zip(&f).map(|(l, fi)| l - omega_raw(*fi, prm)).collect();
    Ok(LtEval { curvature, shifted, f, lap_f, residual })
}

fn raw<'a>(surface: &SurfaceDescriptor, u: &'a ScalarField) -> Result<&'a [f64]> {
    surface.check_len(u.len())?;
    if let Some(node) = u.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node });
    }
    Ok(u.values())
}

/// L^t(x) = Δf − Ω(f) with f determined by the curvature of e^{2x}ĝ.
pub fn residual_lt(surface: &SurfaceDescriptor, params: &WarpParams, x: &ScalarField) -> Result<ScalarField> {
    let xv = raw(surface, x)?;
    let ev = eval_lt(|u| surface.apply_laplacian(u), params, xv)?;
    Ok(ScalarField::from_raw(ev.residual))
}

/// The quadruple determined by x at the given parameters.
pub fn solution_from_x(surface: &SurfaceDescriptor, params: &WarpParams, x: &ScalarField) -> Result<SolutionQuadruple> {
    let xv = raw(surface, x)?;
    let ev = eval_lt(|u| surface.apply_laplacian(u), params, xv)?;
    Ok(SolutionQuadruple { x: x.clone(), f: ScalarField::from_raw(ev.f), eps: params.eps, c: params.c })
}

/// Result of the constant-μ characterization.
#[derive(Debug, Clone)]
pub struct RwrResidual {
    pub field: ScalarField,
    /// Area-weighted mean of the field.
    pub mean: f64,
    /// Area-weighted standard deviation divided by |mean|.
    pub deviation: f64,
}

/// (2K + pε)ϑ² + 2(p+1)ϑΔϑ − (p+1)(p+2)g(∇ϑ,∇ϑ), which is constant
/// exactly on solutions.
pub fn rwr_residual(
    surface: &SurfaceDescriptor,
    x: &ScalarField,
    vartheta: &ScalarField,
    params: &WarpParams,
) -> Result<RwrResidual> {
    let xv = raw(surface, x)?;
    let th = raw(surface, vartheta)?;
    if let Some(i) = th.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("vartheta must be positive, got {} at node {i}", th[i])));
    }
    let p = params.p as f64;
    let k = curvature_raw(surface, xv);
    let lt = surface.apply_laplacian(th);
    let g2 = surface.grad_norm_sq_raw(xv, th);
    let field: Vec<f64> = (0..th.len())
        .map(|i| {
            let lap = (-2.0 * xv[i]).exp() * lt[i];
            (2.0 * k[i] + p * params.eps) * th[i] * th[i] + 2.0 * (p + 1.0) * th[i] * lap
                - (p + 1.0) * (p + 2.0) * g2[i]
        })
        .collect();
    let area = integrate_raw(surface, xv, &vec![1.0; th.len()]);
    let mean = integrate_raw(surface, xv, &field) / area;
    let var = integrate_raw(surface, xv, &field.iter().map(|v| (v - mean).powi(2)).collect::<Vec<_>>()) / area;
    Ok(RwrResidual { field: ScalarField::from_raw(field), mean, deviation: var.sqrt() / mean.abs() })
}

/// Metric-only characterization with ω = (p−1)K + ε.
#[derive(Debug, Clone)]
pub struct CsbResidual {
    /// Left side minus right side, node-wise.
    pub field: ScalarField,
    /// μ after the rescaling that sets the normalization constant to 1.
    pub normalized_mu: f64,
    /// The estimated constant C in ϑ = C|ω|^{1/(p−1)}.
    pub constant: f64,
    /// max |field| divided by max |(2K + pε)ω²|.
    pub relative_max: f64,
}

pub fn csb_residual(surface: &SurfaceDescriptor, solution: &SolutionQuadruple, params: &WarpParams) -> Result<CsbResidual> {
    let xv = raw(surface, &solution.x)?;
    let fv = raw(surface, &solution.f)?;
    let pf = params.p as f64;
    let eps = solution.eps;
    let k = curvature_raw(surface, xv);
    let omega: Vec<f64> = k.iter().map(|ki| (pf - 1.0) * ki + eps).collect();
    let sign = omega[0].signum();
    let bad: Vec<usize> = omega.iter().enumerate().filter(|(_, w)| !(w.signum() == sign && **w != 0.0)).map(|(i, _)| i).collect();
    if let Some(&first) = bad.first() {
        return Err(Error::OmegaSignChange { nodes: bad, first });
    }
    if let Some(i) = fv.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("f must be positive, got {} at node {i}", fv[i])));
    }
    // area-weighted geometric mean of f·|K + ε/(p−1)|^{p/(2p−2)}
    let e = pf / (2.0 * pf - 2.0);
    let logs: Vec<f64> = fv.iter().zip(&omega).map(|(f, w)| f.ln() + e * (w / (pf - 1.0)).abs().ln()).collect();
    let n = fv.len();
    let area = integrate_raw(surface, xv, &vec![1.0; n]);
    let cf = (integrate_raw(surface, xv, &logs) / area).exp();
    let constant = cf.powf(-2.0 / pf) * (pf - 1.0).powf(-1.0 / (pf - 1.0));
    let mu = 4.0 * (1.0 + 1.0 / pf) * solution.c;
    let normalized_mu = mu / (constant * constant);
    let lk = surface.apply_laplacian(&k);
    let g2 = surface.grad_norm_sq_raw(xv, &k);
    let expo = 2.0 * (pf - 2.0) / (pf - 1.0);
    let mut scale = 0.0f64;
    let field: Vec<f64> = (0..n)
        .map(|i| {
            let w = omega[i];
            let lap = (-2.0 * xv[i]).exp() * lk[i];
            let lhs = (pf + 1.0) * (2.0 * w * lap - (3.0 * pf - 2.0) * g2[i]);
            let quad = (2.0 * k[i] + pf * eps) * w * w;
            scale = scale.max(quad.abs());
            lhs - (normalized_mu * w.abs().powf(expo) - quad)
        })
        .collect();
    let relative_max = field.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale.max(1e-300);
    Ok(CsbResidual { field: ScalarField::from_raw(field), normalized_mu, constant, relative_max })
}

/// Δf − af + af^{q−1} with Δ = e^{−2x}Δ̂.
pub fn yamabe_residual(surface: &SurfaceDescriptor, x: &ScalarField, f: &ScalarField, a: f64, q: f64) -> Result<ScalarField> {
    let xv = raw(surface, x)?;
    let fv = raw(surface, f)?;
    if let Some(i) = fv.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("f must be positive, got {} at node {i}", fv[i])));
    }
    if !(a > 0.0) || !(q > 2.0) {
        return Err(Error::Domain(format!("need a > 0 and q > 2, got a = {a}, q = {q}")));
    }
    let lf = surface.apply_laplacian(fv);
    Ok(ScalarField::from_raw(yamabe_raw(&lf, xv, fv, a, q)))
}

pub(crate) fn yamabe_raw(lap_f: &[f64], x: &[f64], f: &[f64], a: f64, q: f64) -> Vec<f64> {
    (0..f.len()).map(|i| (-2.0 * x[i]).exp() * lap_f[i] - a * f[i] + a * f[i].powf(q - 1.0)).collect()
}

/// εA together with the projective curvature pair.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Homothety {
    pub eps_area: f64,
    pub k_max: f64,
    pub k_min: f64,
    /// (K_max, K_min) scaled to unit length.
    pub pair: (f64, f64),
}

impl Homothety {
    /// Distance of [K_max : K_min] from [1 : 1] on the unit circle.
    pub fn distance_from_diagonal(&self) -> f64 {
        (self.pair.0 - self.pair.1).abs() / std::f64::consts::SQRT_2
    }
}

pub fn homothety_invariants(surface: &SurfaceDescriptor, x: &ScalarField, params: &WarpParams) -> Result<Homothety> {
    let xv = raw(surface, x)?;
    Ok(homothety_raw(surface, xv, params.eps))
}

pub(crate) fn homothety_raw(surface: &SurfaceDescriptor, x: &[f64], eps: f64) -> Homothety {
    let k = curvature_raw(surface, x);
    let k_max = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k_min = k.iter().copied().fold(f64::INFINITY, f64::min);
    let nrm = k_max.hypot(k_min);
    let area = integrate_raw(surface, x, &vec![1.0; x.len()]);
    Homothety { eps_area: eps * area, k_max, k_min, pair: (k_max / nrm, k_min / nrm) }
}

/// The sign implications every compact-case solution satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignLedger {
    pub c_positive: bool,
    pub eps_positive: bool,
    pub a_matches_p: bool,
    pub a_zero_rule: bool,
    pub r_negative_rule: bool,
}

impl SignLedger {
    pub fn all(&self) -> bool {
        self.c_positive && self.eps_positive && self.a_matches_p && self.a_zero_rule && self.r_negative_rule
    }
}

pub fn sign_ledger(p: u32, r: f64, eps: f64, c: f64, a: f64, curvature: &[f64]) -> SignLedger {
    let a_zero = a.abs() <= ALGEBRAIC * eps.abs().max(1.0);
    SignLedger {
        c_positive: c > 0.0,
        eps_positive: eps > 0.0,
        a_matches_p: if p == 2 { a_zero } else { a > 0.0 },
        a_zero_rule: !a_zero || (p == 2 && r > 0.0),
        r_negative_rule: r > 0.0 || (p > 2 && curvature.iter().all(|k| *k < 0.0)),
    }
}

/// Like [`sign_ledger`] but fails on the first violated implication.
pub fn check_sign_ledger(p: u32, r: f64, eps: f64, c: f64, a: f64, curvature: &[f64]) -> Result<SignLedger> {
    let l = sign_ledger(p, r, eps, c, a, curvature);
    let rule = if !l.c_positive {
        SignRule::CPositive
    } else if !l.eps_positive {
        SignRule::EpsPositive
    } else if !l.a_matches_p {
        SignRule::AMatchesP
    } else if !l.a_zero_rule {
        SignRule::AZeroNeedsP2RPositive
    } else if !l.r_negative_rule {
        SignRule::RNegativeNeedsP3KNegative
    } else {
        return Ok(l);
    };
    Err(Error::SignViolation { rule })
}

/// Tolerance for PDE residuals on `surface`.
pub fn surface_grid_tolerance(surface: &SurfaceDescriptor) -> f64 {
    match surface.scheme() {
        Some(ZonalScheme::Legendre) => SPECTRAL_GRID_TOL,
        _ => grid_tolerance(surface.spacing()),
    }
}

/// Thresholds applied by [`verify_solution`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VerifyTolerances {
    pub lt: f64,
    pub rwr_deviation: f64,
    pub mu_relative: f64,
    pub csb_relative: f64,
    pub f_consistency: f64,
    pub nonconstant: f64,
}

impl VerifyTolerances {
    pub fn for_surface(surface: &SurfaceDescriptor) -> Self {
        VerifyTolerances {
            lt: 100.0 * NEWTON_TOL,
            rwr_deviation: 1e-6,
            mu_relative: 1e-6,
            csb_relative: surface_grid_tolerance(surface),
            f_consistency: 1e-9,
            nonconstant: NONCONSTANT_K,
        }
    }
}

/// Every residual norm and flag for one solution.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub lt_max: f64,
    pub f_consistency: f64,
    pub rwr_mean: f64,
    pub rwr_deviation: f64,
    pub mu_expected: f64,
    pub mu_relative_error: f64,
    pub csb_relative_max: f64,
    pub csb_normalized_mu: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub homothety: Homothety,
    pub ledger: SignLedger,
    pub tolerances: VerifyTolerances,
    pub lt_ok: bool,
    pub f_ok: bool,
    pub rwr_ok: bool,
    pub mu_ok: bool,
    pub csb_ok: bool,
    pub positivity_ok: bool,
    pub nonconstant_ok: bool,
    pub ledger_ok: bool,
    pub passed: bool,
}

/// Runs the full equivalence chain on a case-(b) solution.
pub fn verify_solution(
    surface: &SurfaceDescriptor,
    params: &WarpParams,
    solution: &SolutionQuadruple,
    tol: &VerifyTolerances,
) -> Result<VerificationReport> {
    let xv = raw(surface, &solution.x)?;
    let fv = raw(surface, &solution.f)?;
    let used = WarpParams { eps: solution.eps, c: solution.c, ..*params };
    let ev = eval_lt(|u| surface.apply_laplacian(u), &used, xv)?;
    let lt_max = ev.residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let f_consistency = ev.f.iter().zip(fv).map(|(a, b)| (a - b).abs() / a.abs()).fold(0.0, f64::max);
    let positivity_ok = fv.iter().all(|v| *v > 0.0);
    let (rwr_mean, rwr_deviation, csb_relative_max, csb_normalized_mu) = if positivity_ok {
        let th = solution.f.map(|f| f.powf(-2.0 / used.p as f64));
        let rwr = rwr_residual(surface, &solution.x, &th, &used)?;
        let csb = csb_residual(surface, solution, &used)?;
        (rwr.mean, rwr.deviation, csb.relative_max, csb.normalized_mu)
    } else {
        (f64::NAN, f64::INFINITY, f64::INFINITY, f64::NAN)
    };
    let mu_expected = 4.0 * (1.0 + 1.0 / used.p as f64) * used.c;
    let mu_relative_error = (rwr_mean - mu_expected).abs() / mu_expected.abs();
    let homothety = homothety_raw(surface, xv, used.eps);
    let ledger = sign_ledger(used.p, used.r, used.eps, used.c, a_of_eps(used.p, used.eps), &ev.curvature);
    let lt_ok = lt_max <= tol.lt;
    let f_ok = f_consistency <= tol.f_consistency;
    let rwr_ok = rwr_deviation < tol.rwr_deviation;
    let mu_ok = mu_relative_error < tol.mu_relative;
    let csb_ok = csb_relative_max < tol.csb_relative;
    let nonconstant_ok = homothety.distance_from_diagonal() > tol.nonconstant;
    let ledger_ok = ledger.all();
    Ok(VerificationReport {
        lt_max,
        f_consistency,
        rwr_mean,
        rwr_deviation,
        mu_expected,
        mu_relative_error,
        csb_relative_max,
        csb_normalized_mu,
        f_min: solution.f.min(),
        f_max: solution.f.max(),
        homothety,
        ledger,
        tolerances: *tol,
        lt_ok,
        f_ok,
        rwr_ok,
        mu_ok,
        csb_ok,
        positivity_ok,
        nonconstant_ok,
        ledger_ok,
        passed: lt_ok && f_ok && rwr_ok && mu_ok && csb_ok && positivity_ok && nonconstant_ok && ledger_ok,
    })
}
