//! Pseudo-arclength continuation with bordered Newton corrections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::{NEWTON_MAX_ITER, NEWTON_TOL};

/// A one-parameter family F(x, t) = 0 on a weighted vector space.
pub trait Problem {
    fn dim(&self) -> usize;
    fn residual(&self, x: &[f64], t: f64) -> Result<Vec<f64>>;
    /// (∂F/∂x, ∂F/∂t).
    fn jacobian(&self, x: &[f64], t: f64) -> Result<(DMatrix<f64>, Vec<f64>)>;
    /// Inner-product weights, summing to one.
    fn weights(&self) -> &[f64];
    /// Called on every converged point; an error ends the branch.
    fn check(&self, x: &[f64], t: f64) -> std::result::Result<(), Termination>;
}

/// Why a branch stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    MaxPoints,
    MaxArclength,
    /// θ left the admissible interval.
    AdmissibilityBoundary,
    /// f lost positivity.
    PositivityLoss,
    /// (p−1)K + ε changed sign.
    OmegaSignChange,
    /// Curvature became constant again.
    ConstantCurvature,
    /// The continuation parameter left the requested range.
    ParameterRange,
    /// Newton failed even at the smallest step.
    NewtonDivergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Kernel coordinate of the first point off the trivial branch.
    pub switch_amplitude: f64,
    pub max_points: usize,
    /// Unbounded when infinite; written as null in JSON.
    #[serde(with = "unbounded")]
    pub max_arclength: f64,
    /// Adapt ds to the Newton iteration count.
    pub adaptive: bool,
    /// +1 follows the kernel direction, −1 its negative.
    pub direction: i8,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: NEWTON_TOL,
            max_iter: NEWTON_MAX_ITER,
            ds: 0.01,
            ds_min: 1e-6,
            ds_max: 0.05,
            switch_amplitude: 1e-3,
            max_points: 30,
            max_arclength: f64::INFINITY,
            adaptive: true,
            direction: 1,
        }
    }
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.max_iter > 0
            && self.ds_min > 0.0
            && self.ds_min <= self.ds
            && self.ds <= self.ds_max
            && self.switch_amplitude > 0.0
            && (self.direction == 1 || self.direction == -1);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "solver settings need tol > 0, 0 < ds_min <= ds <= ds_max, switch_amplitude > 0, direction = +-1".into(),
            ))
        }
    }
}

/// A converged point with its unit tangent.
#[derive(Debug, Clone)]
pub struct RawPoint {
    pub x: Vec<f64>,
    pub t: f64,
    pub arclength: f64,
    pub tangent_x: Vec<f64>,
    pub tangent_t: f64,
    pub newton_iterations: usize,
    pub sigma_min: f64,
    pub residual_max: f64,
}

#[derive(Debug, Clone)]
pub struct RawBranch {
    pub points: Vec<RawPoint>,
    pub termination: Termination,
    /// Angle between the switched branch and the trivial branch.
    pub transversal_angle: f64,
}

/// Linear constraint ⟨wx, x⟩ + wt·t = b appended to F = 0.
#[derive(Debug, Clone)]
pub struct Border {
    pub wx: Vec<f64>,
    pub wt: f64,
    pub b: f64,
}

impl Border {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.wx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.wt * t - self.b
    }
}

/// Relative Newton correction treated as roundoff.
pub const STALL_STEP: f64 = 1e-10;
/// Multiple of the tolerance always accepted at a stalled iterate.
pub const STALL_FACTOR: f64 = 100.0;
/// Roundoff floor of a stalled iterate in units of ε‖J‖∞‖x‖∞.
pub const ROUNDOFF_FACTOR: f64 = 64.0;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn bordered(jx: &DMatrix<f64>, jt: &[f64], border: &Border) -> DMatrix<f64> {
    let n = jx.nrows();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    a.view_mut((0, 0), (n, n)).copy_from(jx);
    for i in 0..n {
        a[(i, n)] = jt[i];
        a[(n, i)] = border.wx[i];
    }
    a[(n, n)] = border.wt;
    a
}

pub struct Converged {
    pub x: Vec<f64>,
    pub t: f64,
    pub iterations: usize,
    pub residual_max: f64,
}

/// Newton on {F = 0, border = 0} from (x, t).
pub fn newton_bordered<P: Problem + ?Sized>(
    prob: &P,
    mut x: Vec<f64>,
    mut t: f64,
    border: &Border,
    s: &NewtonSettings,
) -> Result<Converged> {
    let n = prob.dim();
    let mut last_step = f64::INFINITY;
    let mut jnorm = 0.0f64;
    for it in 0..=s.max_iter {
        let f = prob.residual(&x, t)?;
        let fmax = max_abs(&f);
        let c = border.eval(&x, t);
        if !fmax.is_finite() {
            return Err(Error::NewtonFailure("non-finite residual".into()));
        }
        let c_ok = c.abs() <= s.tol * border.b.abs().max(1.0);
        // fourth-order residuals put a roundoff floor above tol on fine
        // grids; a correction at roundoff level below that floor ends
        // the iteration
        let scale = max_abs(&x).max(t.abs()).max(1.0);
        let floor = (STALL_FACTOR * s.tol).max(ROUNDOFF_FACTOR * f64::EPSILON * jnorm * scale);
        let stalled = last_step <= STALL_STEP * scale && fmax <= floor;
        if c_ok && (fmax <= s.tol || stalled) {
            return Ok(Converged { x, t, iterations: it, residual_max: fmax });
        }
        if it == s.max_iter {
            break;
        }
        let (jx, jt) = prob.jacobian(&x, t)?;
        jnorm = jx.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let a = bordered(&jx, &jt, border);
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            rhs[i] = -f[i];
        }
        rhs[n] = -c;
        let dz = a.lu().solve(&rhs).ok_or_else(|| Error::Singular("bordered Jacobian".into()))?;
        for i in 0..n {
            x[i] += dz[i];
        }
        t += dz[n];
        last_step = dz.amax();
    }
    Err(Error::NewtonFailure(format!("no convergence in {} iterations", s.max_iter)))
}

/// Unit tangent at (x, t) oriented along the previous direction.
pub fn tangent<P: Problem + ?Sized>(prob: &P, x: &[f64], t: f64, prev_x: &[f64], prev_t: f64) -> Result<(Vec<f64>, f64)> {
    let n = prob.dim();
    let w = prob.weights();
    let (jx, jt) = prob.jacobian(x, t)?;
    let border = Border { wx: prev_x.iter().zip(w).map(|(a, b)| a * b).collect(), wt: prev_t, b: 0.0 };
    let a = bordered(&jx, &jt, &border);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    let z = a.lu().solve(&rhs).ok_or_else(|| Error::Singular("tangent system".into()))?;
    let zx: Vec<f64> = z.iter().take(n).copied().collect();
    let nrm = (wnorm2(w, &zx) + z[n] * z[n]).sqrt();
    Ok((zx.iter().map(|v| v / nrm).collect(), z[n] / nrm))
}

pub fn wnorm2(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b * b).sum()
}

pub fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a.iter().zip(b)).map(|(m, (x, y))| m * x * y).sum()
}

/// Smallest singular value by inverse iteration on (JᵀJ)⁻¹.
pub fn sigma_min(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    let lu = j.clone().lu();
    let lut = j.transpose().lu();
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..30 {
        let Some(y) = lut.solve(&v) else { return 0.0 };
        let Some(z) = lu.solve(&y) else { return 0.0 };
        let nz = z.norm();
        if !nz.is_finite() || nz == 0.0 {
            return 0.0;
        }
        let new = 1.0 / nz.sqrt();
        v = z / nz;
        if (new - est).abs() <= 1e-10 * new {
            return new;
        }
        est = new;
    }
    est
}

/// Arclength of the Hermite cubic joining two points with unit tangents,
/// by three-point Gauss quadrature.
pub fn hermite_arclength(w: &[f64], y0: (&[f64], f64), d0: (&[f64], f64), y1: (&[f64], f64), d1: (&[f64], f64)) -> f64 {
    let dx: Vec<f64> = y1.0.iter().zip(y0.0).map(|(a, b)| a - b).collect();
    let chord = (wnorm2(w, &dx) + (y1.1 - y0.1).powi(2)).sqrt();
    if chord == 0.0 {
        return 0.0;
    }
    let gauss = [(0.5 - 0.5 * (0.6f64).sqrt(), 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + 0.5 * (0.6f64).sqrt(), 5.0 / 18.0)];
    let mut total = 0.0;
    for (s, wt) in gauss {
        // derivative of the Hermite basis
        let h00 = 6.0 * s * s - 6.0 * s;
        let h10 = 3.0 * s * s - 4.0 * s + 1.0;
        let h01 = -h00;
        let h11 = 3.0 * s * s - 2.0 * s;
        let deriv_x: Vec<f64> = (0..dx.len())
            .map(|i| h00 * y0.0[i] + h10 * chord * d0.0[i] + h01 * y1.0[i] + h11 * chord * d1.0[i])
            .collect();
        let deriv_t = h00 * y0.1 + h10 * chord * d0.1 + h01 * y1.1 + h11 * chord * d1.1;
        total += wt * (wnorm2(w, &deriv_x) + deriv_t * deriv_t).sqrt();
    }
    total
}

fn classify(err: &Error) -> Termination {
    match err {
        Error::OmegaSignChange { .. } => Termination::OmegaSignChange,
        Error::Domain(_) => Termination::AdmissibilityBoundary,
        _ => Termination::NewtonDivergence,
    }
}

fn make_point<P: Problem + ?Sized>(prob: &P, c: Converged, arclength: f64, tx: Vec<f64>, tt: f64) -> Result<RawPoint> {
    let (jx, _) = prob.jacobian(&c.x, c.t)?;
    Ok(RawPoint {
        sigma_min: sigma_min(&jx),
        x: c.x,
        t: c.t,
        arclength,
        tangent_x: tx,
        tangent_t: tt,
        newton_iterations: c.iterations,
        residual_max: c.residual_max,
    })
}

/// Solves F = 0 with ⟨x − x_ref, u⟩_w = s, starting from (x_ref + s·u, t).
pub fn solve_on_kernel_slice<P: Problem + ?Sized>(
    prob: &P,
    x_ref: &[f64],
    u: &[f64],
    s_val: f64,
    guess: (Vec<f64>, f64),
    settings: &NewtonSettings,
) -> Result<Converged> {
    let w = prob.weights();
    let wx: Vec<f64> = u.iter().zip(w).map(|(a, b)| a * b).collect();
    let b = s_val + wx.iter().zip(x_ref).map(|(a, b)| a * b).sum::<f64>();
    newton_bordered(prob, guess.0, guess.1, &Border { wx, wt: 0.0, b }, settings)
}

/// Switches from the trivial branch at (x_ref, 0) onto the branch
/// tangent to the kernel direction `u` (unit in the weighted norm), then
/// continues by pseudo-arclength.
pub fn switch_and_continue<P: Problem + ?Sized>(
    prob: &P,
    x_ref: &[f64],
    u: &[f64],
    settings: &NewtonSettings,
) -> Result<RawBranch> {
    settings.validate()?;
    let w = prob.weights().to_vec();
    let sgn = settings.direction as f64;
    let s0 = sgn * settings.switch_amplitude;
    let guess: Vec<f64> = x_ref.iter().zip(u).map(|(a, b)| a + s0 * b).collect();
    let first = solve_on_kernel_slice(prob, x_ref, u, s0, (guess, 0.0), settings)?;
    let dx0: Vec<f64> = first.x.iter().zip(x_ref).map(|(a, b)| a - b).collect();
    let chord0 = (wnorm2(&w, &dx0) + first.t * first.t).sqrt();
    let cx: Vec<f64> = dx0.iter().map(|v| v / chord0).collect();
    let ct = first.t / chord0;
    let (mut tx, mut tt) = tangent(prob, &first.x, first.t, &cx, ct)?;
    // orientation: kernel component increasing, ties toward increasing t
    let kc = wdot(&w, &tx, u) * sgn;
    if kc < 0.0 || (kc.abs() < 1e-12 && tt < 0.0) {
        tx.iter_mut().for_each(|v| *v = -*v);
        tt = -tt;
    }
    let transversal_angle = tt.abs().min(1.0).acos();
    if let Err(reason) = prob.check(&first.x, first.t) {
        return Ok(RawBranch { points: Vec::new(), termination: reason, transversal_angle });
    }
    let mut points = vec![make_point(prob, first, chord0, tx, tt)?];
    let mut ds = settings.ds;
    let termination = loop {
        let last = points.last().unwrap();
        if points.len() >= settings.max_points {
            break Termination::MaxPoints;
        }
        if last.arclength >= settings.max_arclength {
            break Termination::MaxArclength;
        }
        let pred_x: Vec<f64> = last.x.iter().zip(&last.tangent_x).map(|(a, b)| a + ds * b).collect();
        let pred_t = last.t + ds * last.tangent_t;
        let wx: Vec<f64> = last.tangent_x.iter().zip(&w).map(|(a, b)| a * b).collect();
        let b = wx.iter().zip(&last.x).map(|(a, b)| a * b).sum::<f64>() + last.tangent_t * last.t + ds;
        let border = Border { wx, wt: last.tangent_t, b };
        match newton_bordered(prob, pred_x, pred_t, &border, settings) {
            Ok(c) => {
                // a corrector far from its predictor has usually jumped to
                // another branch (typically the trivial one); retry smaller
                let jump = {
                    let dx: Vec<f64> = c.x.iter().zip(&last.x).map(|(a, b)| a - b).collect();
                    (wnorm2(&w, &dx) + (c.t - last.t).powi(2)).sqrt() > 2.0 * ds
                };
                let verdict = prob.check(&c.x, c.t);
                if jump || verdict == Err(Termination::ConstantCurvature) {
                    if ds / 2.0 < settings.ds_min {
                        break verdict.err().unwrap_or(Termination::NewtonDivergence);
                    }
                    ds /= 2.0;
                    continue;
                }
                if let Err(reason) = verdict {
                    break reason;
                }
                let (nx, nt) = tangent(prob, &c.x, c.t, &last.tangent_x, last.tangent_t)?;
                let seg = hermite_arclength(&w, (&last.x, last.t), (&last.tangent_x, last.tangent_t), (&c.x, c.t), (&nx, nt));
                let arclength = last.arclength + seg;
                let iters = c.iterations;
                points.push(make_point(prob, c, arclength, nx, nt)?);
                if settings.adaptive {
                    if iters <= 3 {
                        ds = (ds * 1.5).min(settings.ds_max);
                    } else if iters > 8 {
                        ds *= 0.7;
                    }
                }
            }
            Err(err) => {
                if !settings.adaptive || ds / 2.0 < settings.ds_min {
                    break classify(&err);
                }
                ds /= 2.0;
            }
        }
    };
    Ok(RawBranch { points, termination, transversal_angle })
}
