//! Trivial-solution curve, bifurcation detection and branch tracing.

mod engine;
mod scan;
mod yamabe;

pub use engine::{
    hermite_arclength, newton_bordered, sigma_min, solve_on_kernel_slice, switch_and_continue, tangent, wdot, wnorm2,
    Border, Converged, NewtonSettings, Problem, RawBranch, RawPoint, Termination,
};
pub use scan::{bifurcation_scan, Crossing};
pub use yamabe::{yamabe_branch, yamabe_search, YamabeBranch, YamabeProblem};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ScalarField, SurfaceDescriptor};
use crate::residuals::{
    eval_lt, homothety_raw, omega_prime_raw, residual_lt, solution_from_x, theta_of_lambda, trivial_derivatives,
    Homothety, SolutionQuadruple, WarpParams,
};
use crate::spectra::{check_sign_rule, EigenPair};
use crate::tolerances::NONCONSTANT_K;

/// Open interval (lo, hi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }
}

/// The θ-interval on which ε, c and Λ(θ) are simultaneously positive.
pub fn admissible_interval(p: u32, r: f64, khat: f64) -> Result<Interval> {
    check_sign_rule(p, r, khat)?;
    let pf = p as f64;
    if r > 0.0 {
        Ok(Interval { lo: (pf * khat / (2.0 * (pf + 1.0) * r)).max(0.0), hi: f64::INFINITY })
    } else {
        Ok(Interval { lo: 0.0, hi: pf * (pf - 2.0) * khat / (2.0 * (pf * pf - 1.0) * r) })
    }
}

/// δ(λ), checked to lie strictly inside the admissible interval.
pub fn delta_of_lambda(p: u32, r: f64, khat: f64, lambda: f64) -> Result<f64> {
    let iv = admissible_interval(p, r, khat)?;
    let delta = theta_of_lambda(p, r, khat, lambda);
    if !iv.contains(delta) {
        return Err(Error::Domain(format!("delta = {delta} is not inside ({}, {})", iv.lo, iv.hi)));
    }
    Ok(delta)
}

/// One point of the constant-solution curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrivialBranchPoint {
    pub theta: f64,
    pub eps: f64,
    pub c: f64,
    pub a: f64,
    pub f_const: f64,
    pub admissible: bool,
}

pub fn trivial_point(p: u32, r: f64, khat: f64, theta: f64) -> Result<TrivialBranchPoint> {
    let prm = WarpParams::on_trivial_curve(p, r, khat, theta)?;
    let iv = admissible_interval(p, r, khat)?;
    Ok(TrivialBranchPoint {
        theta,
        eps: prm.eps,
        c: prm.c,
        a: prm.a,
        f_const: prm.f_const(),
        admissible: iv.contains(theta) && prm.admissible(),
    })
}

/// The factored linearization at x = 0 on the reduced subspace:
/// θ^{β−1}/(4r(1−1/p²)) · (Δ̂ + Λ(θ))(Δ̂ + 2K̂).
pub fn linearization_at_trivial(surface: &SurfaceDescriptor, params: &WarpParams) -> DMatrix<f64> {
    let l = surface.reduced_laplacian().to_dense();
    let n = l.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let pf = params.p as f64;
    let lam = crate::residuals::lambda_of_theta(params.p, params.r, params.khat, params.theta);
    let scale = params.theta.powf(params.beta() - 1.0) / (4.0 * params.r * (1.0 - 1.0 / (pf * pf)));
    (&l + &id * lam) * (&l + &id * (2.0 * params.khat)) * scale
}

/// Reduced-space residual map (x, t) ↦ L^t(x) for one λ-branch.
pub struct WarpProblem<'a> {
    surface: &'a SurfaceDescriptor,
    base: WarpParams,
    lap: DMatrix<f64>,
    weights: Vec<f64>,
}

impl<'a> WarpProblem<'a> {
    /// `base` holds λ and δ; t is the continuation parameter.
    pub fn new(surface: &'a SurfaceDescriptor, base: WarpParams) -> Self {
        let m = surface.reduced_mass();
        let total: f64 = m.iter().sum();
        WarpProblem {
            surface,
            base: base.with_t(0.0).unwrap_or(base),
            lap: surface.reduced_laplacian().to_dense(),
            weights: m.iter().map(|v| v / total).collect(),
        }
    }

    pub fn params_at(&self, t: f64) -> Result<WarpParams> {
        self.base.with_t(t)
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.surface.apply_reduced_laplacian(u)
    }
}

impl Problem for WarpProblem<'_> {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn residual(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let prm = self.params_at(t)?;
        Ok(eval_lt(|u| self.apply(u), &prm, x)?.residual)
    }

    fn jacobian(&self, x: &[f64], t: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let prm = self.params_at(t)?;
        let ev = eval_lt(|u| self.apply(u), &prm, x)?;
        let n = x.len();
        let pf = prm.p as f64;
        let beta = prm.beta();
        let e2: Vec<f64> = x.iter().map(|v| (-2.0 * v).exp()).collect();
        let fp: Vec<f64> = ev.f.iter().zip(&ev.shifted).map(|(f, w)| beta * f / w).collect();
        let om: Vec<f64> = ev.f.iter().map(|f| omega_prime_raw(*f, &prm)).collect();
        // dK/dx = −2 diag(K) − diag(e^{−2x}) Δ̂
        let mut dk = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                dk[(i, j)] = -e2[i] * self.lap[(i, j)];
            }
            dk[(i, i)] -= 2.0 * ev.curvature[i];
        }
        // df/dx = diag(F′) dK
        let mut df = dk;
        for i in 0..n {
            df.row_mut(i).scale_mut(fp[i]);
        }
        let mut j = &self.lap * &df;
        for i in 0..n {
            j.row_mut(i).scale_mut(e2[i]);
        }
        for i in 0..n {
            for k in 0..n {
                j[(i, k)] -= om[i] * df[(i, k)];
            }
            j[(i, i)] -= 2.0 * ev.lap_f[i];
        }
        let (de, dc, da) = trivial_derivatives(prm.p, prm.r, prm.khat, prm.theta);
        let g: Vec<f64> = fp.iter().map(|v| v * de / (pf - 1.0)).collect();
        let lg = self.apply(&g);
        let jt = (0..n)
            .map(|i| e2[i] * lg[i] - om[i] * g[i] - (da * ev.f[i] - dc * ev.f[i].powf(1.0 + 4.0 / pf)))
            .collect();
        Ok((j, jt))
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, x: &[f64], t: f64) -> std::result::Result<(), Termination> {
        let prm = self.params_at(t).map_err(|_| Termination::AdmissibilityBoundary)?;
        if !prm.admissible() {
            return Err(Termination::AdmissibilityBoundary);
        }
        let ev = eval_lt(|u| self.apply(u), &prm, x).map_err(|_| Termination::OmegaSignChange)?;
        if ev.f.iter().any(|f| !(*f > 0.0)) {
            return Err(Termination::PositivityLoss);
        }
        let kmax = ev.curvature.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let kmin = ev.curvature.iter().copied().fold(f64::INFINITY, f64::min);
        let nrm = kmax.hypot(kmin);
        if (kmax - kmin).abs() / nrm / std::f64::consts::SQRT_2 <= NONCONSTANT_K {
            return Err(Termination::ConstantCurvature);
        }
        Ok(())
    }
}

/// Per-point solver diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PointDiagnostics {
    pub newton_iterations: usize,
    pub sigma_min: f64,
    pub residual_max: f64,
}

#[derive(Debug, Clone)]
pub struct BranchPoint {
    /// Full-surface field (x for λ-branches, f for the Yamabe branch).
    pub x: ScalarField,
    pub t: f64,
    pub arclength: f64,
    pub tangent: (ScalarField, f64),
    pub diagnostics: PointDiagnostics,
}

#[derive(Debug, Clone)]
pub struct BranchState {
    pub points: Vec<BranchPoint>,
    /// Unit tangent at the last point.
    pub tangent: (ScalarField, f64),
    pub termination: Termination,
    pub transversal_angle: f64,
    /// Kernel eigenfunction the branch was switched along.
    pub kernel: ScalarField,
    /// Reduced vectors, kept for re-solving and interpolation.
    pub(crate) raw: RawBranch,
}

impl BranchState {
    pub(crate) fn from_raw(surface: &SurfaceDescriptor, raw: RawBranch, kernel: ScalarField) -> Self {
        let red = surface.reduction();
        let points: Vec<BranchPoint> = raw
            .points
            .iter()
            .map(|p| BranchPoint {
                x: ScalarField::from_raw(red.expand(&p.x)),
                t: p.t,
                arclength: p.arclength,
                tangent: (ScalarField::from_raw(red.expand(&p.tangent_x)), p.tangent_t),
                diagnostics: PointDiagnostics {
                    newton_iterations: p.newton_iterations,
                    sigma_min: p.sigma_min,
                    residual_max: p.residual_max,
                },
            })
            .collect();
        let tangent = points
            .last()
            .map(|p| p.tangent.clone())
            .unwrap_or_else(|| (ScalarField::constant(surface, 0.0), 1.0));
        BranchState { points, tangent, termination: raw.termination, transversal_angle: raw.transversal_angle, kernel, raw }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Solves for the branch point whose kernel coordinate ⟨x, u⟩ equals
    /// `s`, starting from the Hermite interpolant between stored points.
    pub fn locate<P: Problem>(&self, prob: &P, u_reduced: &[f64], s: f64, settings: &NewtonSettings) -> Result<Converged> {
        let w = prob.weights();
        let pts = &self.raw.points;
        let coord: Vec<f64> = pts.iter().map(|p| wdot(w, &p.x, u_reduced)).collect();
        let k = (0..pts.len().saturating_sub(1))
            .find(|&k| (coord[k] - s) * (coord[k + 1] - s) <= 0.0)
            .ok_or_else(|| Error::InvalidInput(format!("kernel coordinate {s} is outside the stored branch")))?;
        let (a, b) = (&pts[k], &pts[k + 1]);
        let sig = (s - coord[k]) / (coord[k + 1] - coord[k]);
        let h = b.arclength - a.arclength;
        let (h00, h10, h01, h11) = (
            2.0 * sig.powi(3) - 3.0 * sig * sig + 1.0,
            sig.powi(3) - 2.0 * sig * sig + sig,
            -2.0 * sig.powi(3) + 3.0 * sig * sig,
            sig.powi(3) - sig * sig,
        );
        let gx: Vec<f64> = (0..a.x.len())
            .map(|i| h00 * a.x[i] + h10 * h * a.tangent_x[i] + h01 * b.x[i] + h11 * h * b.tangent_x[i])
            .collect();
        let gt = h00 * a.t + h10 * h * a.tangent_t + h01 * b.t + h11 * h * b.tangent_t;
        let zero = vec![0.0; gx.len()];
        solve_on_kernel_slice(prob, &zero, u_reduced, s, (gx, gt), settings)
    }
}

/// Summary quantities of one λ-branch point.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRow {
    pub index: usize,
    pub arclength: f64,
    pub t: f64,
    pub theta: f64,
    pub eps: f64,
    pub c: f64,
    pub mu: f64,
    pub eps_area: f64,
    pub k_max: f64,
    pub k_min: f64,
    pub residual_max: f64,
    pub newton_iterations: usize,
    pub sigma_min: f64,
}

/// A traced λ-branch with its parameters.
#[derive(Debug, Clone)]
pub struct WarpBranch {
    pub base: WarpParams,
    pub state: BranchState,
}

impl WarpBranch {
    pub fn params_at(&self, k: usize) -> Result<WarpParams> {
        self.base.with_t(self.state.points[k].t)
    }

    pub fn solution(&self, surface: &SurfaceDescriptor, k: usize) -> Result<SolutionQuadruple> {
        solution_from_x(surface, &self.params_at(k)?, &self.state.points[k].x)
    }

    pub fn homothety(&self, surface: &SurfaceDescriptor, k: usize) -> Result<Homothety> {
        let prm = self.params_at(k)?;
        Ok(homothety_raw(surface, self.state.points[k].x.values(), prm.eps))
    }

    pub fn rows(&self, surface: &SurfaceDescriptor) -> Result<Vec<BranchRow>> {
        (0..self.state.len())
            .map(|k| {
                let pt = &self.state.points[k];
                let prm = self.params_at(k)?;
                let h = homothety_raw(surface, pt.x.values(), prm.eps);
                let res = residual_lt(surface, &prm, &pt.x)?;
                Ok(BranchRow {
                    index: k,
                    arclength: pt.arclength,
                    t: pt.t,
                    theta: prm.theta,
                    eps: prm.eps,
                    c: prm.c,
                    mu: prm.mu,
                    eps_area: h.eps_area,
                    k_max: h.k_max,
                    k_min: h.k_min,
                    residual_max: res.values().iter().fold(0.0f64, |m, v| m.max(v.abs())),
                    newton_iterations: pt.diagnostics.newton_iterations,
                    sigma_min: pt.diagnostics.sigma_min,
                })
            })
            .collect()
    }

    /// εA extrapolated linearly to arclength zero from the first two points.
    pub fn eps_area_limit(&self, surface: &SurfaceDescriptor) -> Result<f64> {
        if self.state.len() < 2 {
            return Err(Error::InvalidInput("need at least two branch points".into()));
        }
        let (s0, s1) = (self.state.points[0].arclength, self.state.points[1].arclength);
        let e0 = self.homothety(surface, 0)?.eps_area;
        let e1 = self.homothety(surface, 1)?.eps_area;
        Ok(e0 - s0 * (e1 - e0) / (s1 - s0))
    }
}

/// Traces the λ-branch bifurcating at t = 0 along `kernel`, whose
/// eigenvalue defines λ (the discrete one, so the branch starts exactly
/// at the discrete bifurcation point).
pub fn trace_branch(
    surface: &SurfaceDescriptor,
    p: u32,
    r: f64,
    kernel: &EigenPair,
    settings: &NewtonSettings,
) -> Result<WarpBranch> {
    let khat = surface.khat();
    if !crate::spectra::is_admissible(kernel, p, r, khat) {
        return Err(Error::Constraint(format!("eigenvalue {} is not an admissible bifurcation value", kernel.lambda)));
    }
    delta_of_lambda(p, r, khat, kernel.lambda)?;
    let base = WarpParams::from_lambda(p, r, khat, kernel.lambda, 0.0)?;
    let prob = WarpProblem::new(surface, base);
    let u = surface.reduction().restrict(kernel.phi.values());
    // unit length in the area-normalized weights
    let nrm = wnorm2(prob.weights(), &u).sqrt();
    let u: Vec<f64> = u.iter().map(|v| v / nrm).collect();
    let zero = vec![0.0; u.len()];
    let raw = switch_and_continue(&prob, &zero, &u, settings)?;
    let kernel_field = ScalarField::from_raw(surface.reduction().expand(&u));
    Ok(WarpBranch { base, state: BranchState::from_raw(surface, raw, kernel_field) })
}

#[cfg(test)]
mod tests;
