//! Independent oracle: the warped-product metric f^{4/p}(g + η) on
//! M × S^p in explicit coordinates, with curvature and div R computed
//! from scratch.
//!
//! Coordinates are y = (s, φ, α₁, …, α_p): colatitude and azimuth on the
//! base, then polar angles α₁..α_{p−1} and the azimuth α_p of the fibre
//! sphere. The metric is diagonal and every component is a product of
//! one-variable factors, so its jet is exact given jets of x(s) and f(s).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ScalarField, SurfaceDescriptor, SurfaceKind};
use crate::legendre::{Parity, ZonalSeries};
use crate::residuals::{SolutionQuadruple, WarpParams};

/// Interior chart on M × S^p with fibre radius ρ = √((p−1)/ε).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductChart {
    pub p: usize,
    pub eps: f64,
    pub rho: f64,
    pub khat: f64,
    /// Distance kept from every polar coordinate singularity.
    pub margin: f64,
}

impl ProductChart {
    pub fn new(p: usize, eps: f64, khat: f64, margin: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidInput(format!("fibre dimension must be at least 2, got {p}")));
        }
        if !(eps > 0.0) || !(khat > 0.0) {
            return Err(Error::Domain("the product chart needs eps > 0 and a round base (khat > 0)".into()));
        }
        if !(margin > 0.0 && margin < 1.0) {
            return Err(Error::InvalidInput(format!("chart margin must lie in (0, 1), got {margin}")));
        }
        Ok(ProductChart { p, eps, rho: ((p as f64 - 1.0) / eps).sqrt(), khat, margin })
    }

    pub fn dim(&self) -> usize {
        2 + self.p
    }

    /// Coordinates whose range is (0, π): s and the fibre polar angles.
    fn is_polar(&self, k: usize) -> bool {
        k == 0 || (k >= 2 && k < 1 + self.p)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.dim()
            && (0..self.dim()).all(|k| !self.is_polar(k) || (y[k] >= self.margin && y[k] <= std::f64::consts::PI - self.margin))
    }

    /// Quasi-random interior points from the Halton sequence in the first
    /// `dim` prime bases, skipping `skip` leading terms.
    pub fn halton_points(&self, count: usize, skip: usize) -> Vec<Vec<f64>> {
        const PRIMES: [u8; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
        let pi = std::f64::consts::PI;
        (0..count)
            .map(|i| {
                (0..self.dim())
                    .map(|k| {
                        let u = halton::number(PRIMES[k % PRIMES.len()], i + skip + 1);
                        if self.is_polar(k) {
                            self.margin + u * (pi - 2.0 * self.margin)
                        } else {
                            2.0 * pi * u
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Value and first two derivatives of a one-variable function.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet {
    v: f64,
    d: f64,
    dd: f64,
}

impl Jet {
    fn constant(v: f64) -> Jet {
        Jet { v, d: 0.0, dd: 0.0 }
    }

    fn mul(self, o: Jet) -> Jet {
        Jet { v: self.v * o.v, d: self.d * o.v + self.v * o.d, dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd }
    }

    fn sin_sq(a: f64) -> Jet {
        let (s, c) = a.sin_cos();
        Jet { v: s * s, d: 2.0 * s * c, dd: 2.0 * (c * c - s * s) }
    }
}

/// How f is represented between nodes.
#[derive(Debug, Clone)]
pub enum ProfileF {
    /// An interpolant of nodal f.
    Series(ZonalSeries),
    /// f recomputed pointwise from the x series through
    /// K = e^{−2x}K̂(1 − Δx) and f = [(K + shift)/scale]^β, with Δ the
    /// unit-sphere Laplacian applied exactly per Legendre mode.
    FromX { lap: ZonalSeries, khat: f64, shift: f64, scale: f64, beta: f64 },
}

/// Zonal profiles of x and f as smooth functions of the colatitude.
#[derive(Debug, Clone)]
pub struct ZonalProfile {
    pub x: ZonalSeries,
    pub f: ProfileF,
    /// f is multiplied by 1 + bump·cos 2s.
    pub bump: f64,
}

fn series_jet(z: &ZonalSeries, s: f64) -> Jet {
    let j = z.jet(s);
    Jet { v: j.v, d: j.ds, dd: j.dss }
}

fn fit_nodal(surface: &SurfaceDescriptor, values: &[f64]) -> Result<ZonalSeries> {
    let Some(scheme) = surface.scheme() else {
        return Err(Error::InvalidInput("the product oracle needs a zonal surface".into()));
    };
    let s = surface.colatitudes();
    let n = s.len();
    let parity = match surface.kind() {
        SurfaceKind::ZonalProjectivePlane => Parity::Even,
        _ => Parity::All,
    };
    let modes = match scheme {
        crate::geometry::ZonalScheme::Legendre => n,
        crate::geometry::ZonalScheme::FiniteDifference => (n / 2).min(48),
    };
    ZonalSeries::fit(s, values, parity, modes)
}

/// Zeroes coefficients below `tau` times the largest one.
pub fn denoise(z: &ZonalSeries, tau: f64) -> ZonalSeries {
    let big = z.coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    ZonalSeries { coeffs: z.coeffs.iter().map(|&c| if c.abs() < tau * big { 0.0 } else { c }).collect() }
}

impl ZonalProfile {
    /// Interpolates nodal x and f independently. Collocation surfaces are
    /// interpolated exactly in their own basis; FD grids are least-squares
    /// fitted with at most half as many modes as nodes.
    pub fn from_fields(surface: &SurfaceDescriptor, x: &ScalarField, f: &ScalarField) -> Result<Self> {
        Ok(ZonalProfile { x: fit_nodal(surface, x.values())?, f: ProfileF::Series(fit_nodal(surface, f.values())?), bump: 0.0 })
    }

    /// Interpolates x and derives f from it. Recomputing f avoids the
    /// k² amplification of roundoff that a nodal f carries from Δx.
    pub fn from_solution(surface: &SurfaceDescriptor, params: &WarpParams, x: &ScalarField, tau: f64) -> Result<Self> {
        let xs = denoise(&fit_nodal(surface, x.values())?, tau);
        let p = params.p as f64;
        Ok(ZonalProfile {
            f: ProfileF::FromX {
                lap: xs.laplacian(),
                khat: params.khat,
                shift: params.eps / (p - 1.0),
                scale: 2.0 * params.r * (1.0 + 1.0 / p),
                beta: params.beta(),
            },
            x: xs,
            bump: 0.0,
        })
    }

    /// The constant profile x ≡ 0, f ≡ f0.
    pub fn constant(f0: f64) -> Self {
        ZonalProfile { x: ZonalSeries { coeffs: vec![0.0] }, f: ProfileF::Series(ZonalSeries { coeffs: vec![f0] }), bump: 0.0 }
    }

    /// f at colatitude s.
    pub fn f_value(&self, s: f64) -> f64 {
        self.jets(s).1.v
    }

    fn jets(&self, s: f64) -> (Jet, Jet) {
        let x = series_jet(&self.x, s);
        let f = match &self.f {
            ProfileF::Series(z) => series_jet(z, s),
            ProfileF::FromX { lap, khat, shift, scale, beta } => {
                let e = (-2.0 * x.v).exp();
                let em = Jet { v: e, d: -2.0 * x.d * e, dd: (-2.0 * x.dd + 4.0 * x.d * x.d) * e };
                let l = series_jet(lap, s);
                let a = Jet { v: khat * (1.0 - l.v), d: -khat * l.d, dd: -khat * l.dd };
                let k = em.mul(a);
                let u = Jet { v: (k.v + shift) / scale, d: k.d / scale, dd: k.dd / scale };
                let b1 = u.v.powf(beta - 1.0);
                Jet { v: u.v.powf(*beta), d: beta * b1 * u.d, dd: beta * (beta - 1.0) * u.v.powf(beta - 2.0) * u.d * u.d + beta * b1 * u.dd }
            }
        };
        let (s2, c2) = (2.0 * s).sin_cos();
        let bump = Jet { v: 1.0 + self.bump * c2, d: -2.0 * self.bump * s2, dd: -4.0 * self.bump * c2 };
        (x, f.mul(bump))
    }
}

/// Metric components with first and second coordinate derivatives,
/// stored densely: g[i][j], dg[k][i][j] = ∂_k g_ij, ddg[k][l][i][j].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricJet {
    pub n: usize,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
    pub ddg: Vec<f64>,
}

impl MetricJet {
    fn zeros(n: usize) -> Self {
        MetricJet { n, g: vec![0.0; n * n], dg: vec![0.0; n * n * n], ddg: vec![0.0; n * n * n * n] }
    }

    pub fn component(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.n + j]
    }

    pub fn d(&self, k: usize, i: usize, j: usize) -> f64 {
        self.dg[(k * self.n + i) * self.n + j]
    }

    pub fn dd(&self, k: usize, l: usize, i: usize, j: usize) -> f64 {
        self.ddg[((k * self.n + l) * self.n + i) * self.n + j]
    }

    pub fn determinant(&self) -> f64 {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.g).determinant()
    }
}

/// f^{4/p}(e^{2x}ĝ + η) and its jet at chart point y.
pub fn assemble_metric(chart: &ProductChart, profile: &ZonalProfile, y: &[f64]) -> Result<MetricJet> {
    if !chart.contains(y) {
        return Err(Error::ChartDomain(format!("point {y:?} is outside the chart interior")));
    }
    let n = chart.dim();
    let p = chart.p as f64;
    let (x, f) = profile.jets(y[0]);
    if !(f.v > 0.0) {
        return Err(Error::Domain(format!("f = {} is not positive at s = {}", f.v, y[0])));
    }
    // conformal factor F = f^{4/p} and base factor E = e^{2x}
    let e4 = 4.0 / p;
    let fp = f.v.powf(e4 - 1.0);
    let big_f = Jet {
        v: f.v.powf(e4),
        d: e4 * fp * f.d,
        dd: e4 * (e4 - 1.0) * f.v.powf(e4 - 2.0) * f.d * f.d + e4 * fp * f.dd,
    };
    let ex = (2.0 * x.v).exp();
    let big_e = Jet { v: ex, d: 2.0 * x.d * ex, dd: (2.0 * x.dd + 4.0 * x.d * x.d) * ex };
    let base = big_f.mul(big_e).mul(Jet::constant(1.0 / chart.khat));

    let mut m = MetricJet::zeros(n);
    // factors[i] = list of (coordinate, jet); the rest of g_ii is constant
    for i in 0..n {
        let mut factors: Vec<(usize, Jet)> = Vec::new();
        let mut constant = 1.0;
        match i {
            0 => factors.push((0, base)),
            1 => factors.push((0, base.mul(Jet::sin_sq(y[0])))),
            _ => {
                factors.push((0, big_f));
                constant = chart.rho * chart.rho;
                for a in 2..i {
                    factors.push((a, Jet::sin_sq(y[a])));
                }
            }
        }
        let prod = |skip: &[usize]| -> f64 {
            factors.iter().filter(|(k, _)| !skip.contains(k)).map(|(_, j)| j.v).product::<f64>() * constant
        };
        m.g[i * n + i] = prod(&[]);
        for &(k, jk) in &factors {
            m.dg[(k * n + i) * n + i] = jk.d * prod(&[k]);
            m.ddg[((k * n + k) * n + i) * n + i] = jk.dd * prod(&[k]);
            for &(l, jl) in &factors {
                if l != k {
                    m.ddg[((k * n + l) * n + i) * n + i] = jk.d * jl.d * prod(&[k, l]);
                }
            }
        }
    }
    Ok(m)
}

/// Christoffel symbols, Riemann tensor R^a_{bcd}, Ricci and scalar
/// curvature at one point.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub n: usize,
    /// Γ^k_{ij} at [(k n + i) n + j].
    pub gamma: Vec<f64>,
    /// R^a_{bcd} at [((a n + b) n + c) n + d].
    pub riemann: Vec<f64>,
    /// R_{bd} = R^a_{bad}.
    pub ricci: Vec<f64>,
    pub scalar: f64,
}

impl Curvature {
    pub fn r(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.riemann[((a * self.n + b) * self.n + c) * self.n + d]
    }

    /// max |R^a_{bcd} + R^a_{cdb} + R^a_{dbc}|.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        worst = worst.max((self.r(a, b, c, d) + self.r(a, c, d, b) + self.r(a, d, b, c)).abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn curvature(m: &MetricJet) -> Curvature {
    let n = m.n;
    let ginv: Vec<f64> = {
        let inv = nalgebra::DMatrix::from_row_slice(n, n, &m.g).try_inverse().unwrap_or_else(|| nalgebra::DMatrix::zeros(n, n));
        (0..n * n).map(|idx| inv[(idx / n, idx % n)]).collect()
    };
    let gi = |a: usize, b: usize| ginv[a * n + b];
    // ∂_k g^{ab} = −g^{ac} ∂_k g_{cd} g^{db}
    let mut dginv = vec![0.0; n * n * n];
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    for d in 0..n {
                        s -= gi(a, c) * m.d(k, c, d) * gi(d, b);
                    }
                }
                dginv[(k * n + a) * n + b] = s;
            }
        }
    }
    // lowered symbols Γ_{l i j} and their derivatives
    let low = |l: usize, i: usize, j: usize| 0.5 * (m.d(i, j, l) + m.d(j, i, l) - m.d(l, i, j));
    let dlow = |q: usize, l: usize, i: usize, j: usize| 0.5 * (m.dd(q, i, j, l) + m.dd(q, j, i, l) - m.dd(q, l, i, j));
    let mut gamma = vec![0.0; n * n * n];
    let mut dgamma = vec![0.0; n * n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += gi(k, l) * low(l, i, j);
                }
                gamma[(k * n + i) * n + j] = s;
                for q in 0..n {
                    let mut ds = 0.0;
                    for l in 0..n {
                        ds += dginv[(q * n + k) * n + l] * low(l, i, j) + gi(k, l) * dlow(q, l, i, j);
                    }
                    dgamma[((q * n + k) * n + i) * n + j] = ds;
                }
            }
        }
    }
    let gm = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let dgm = |q: usize, k: usize, i: usize, j: usize| dgamma[((q * n + k) * n + i) * n + j];
    let mut riemann = vec![0.0; n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dgm(c, a, d, b) - dgm(d, a, c, b);
                    for e in 0..n {
                        v += gm(a, c, e) * gm(e, d, b) - gm(a, d, e) * gm(e, c, b);
                    }
                    riemann[((a * n + b) * n + c) * n + d] = v;
                }
            }
        }
    }
    let mut ricci = vec![0.0; n * n];
    for b in 0..n {
        for d in 0..n {
            ricci[b * n + d] = (0..n).map(|a| riemann[((a * n + b) * n + a) * n + d]).sum();
        }
    }
    let scalar = (0..n).flat_map(|b| (0..n).map(move |d| (b, d))).map(|(b, d)| gi(b, d) * ricci[b * n + d]).sum();
    Curvature { n, gamma, riemann, ricci, scalar }
}

/// Finite-difference controls for the divergence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivSettings {
    pub step: f64,
    /// Combine steps h and h/2 to cancel the h⁴ term.
    pub richardson: bool,
}

impl Default for DivSettings {
    fn default() -> Self {
        DivSettings { step: 1e-3, richardson: true }
    }
}

/// Per-point oracle output.
#[derive(Debug, Clone, Serialize)]
pub struct PointCheck {
    pub y: Vec<f64>,
    /// max over (a, b, c) of |∇_d R^d_{abc}|.
    pub div_r: f64,
    pub bianchi: f64,
    pub scalar: f64,
    pub det: f64,
}

fn riemann_at(chart: &ProductChart, profile: &ZonalProfile, y: &[f64]) -> Result<Curvature> {
    Ok(curvature(&assemble_metric(chart, profile, y)?))
}

/// ∂_d R^a_{bcd'} in direction `dir` by the 4th-order central stencil.
fn central(chart: &ProductChart, profile: &ZonalProfile, y: &[f64], dir: usize, h: f64) -> Result<Vec<f64>> {
    let at = |off: f64| -> Result<Vec<f64>> {
        let mut z = y.to_vec();
        z[dir] += off;
        Ok(riemann_at(chart, profile, &z)?.riemann)
    };
    let (p1, m1, p2, m2) = (at(h)?, at(-h)?, at(2.0 * h)?, at(-2.0 * h)?);
    Ok((0..p1.len()).map(|i| (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h)).collect())
}

/// ∇_d R^d_{abc} at y, flattened as [(a n + b) n + c].
pub fn div_r_tensor(chart: &ProductChart, profile: &ZonalProfile, y: &[f64], settings: &DivSettings) -> Result<Vec<f64>> {
    let h = settings.step;
    if !(h >= 1e-8) {
        return Err(Error::StepUnderflow(format!("finite-difference step {h} is too small")));
    }
    if !chart.contains(y) {
        return Err(Error::ChartDomain(format!("point {y:?} is outside the chart interior")));
    }
    // the stencil must stay inside the chart
    for k in (0..chart.dim()).filter(|&k| chart.is_polar(k)) {
        if y[k] - 2.0 * h < 0.5 * chart.margin || y[k] + 2.0 * h > std::f64::consts::PI - 0.5 * chart.margin {
            return Err(Error::ChartDomain(format!("stencil at {y:?} leaves the chart interior")));
        }
    }
    let n = chart.dim();
    let cur = riemann_at(chart, profile, y)?;
    let mut deriv: Vec<Vec<f64>> = Vec::with_capacity(n);
    for dir in 0..n {
        let d1 = central(chart, profile, y, dir, h)?;
        deriv.push(if settings.richardson {
            let d2 = central(chart, profile, y, dir, 0.5 * h)?;
            d1.iter().zip(&d2).map(|(a, b)| (16.0 * b - a) / 15.0).collect()
        } else {
            d1
        });
    }
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let gm = |k: usize, i: usize, j: usize| cur.gamma[(k * n + i) * n + j];
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut v = 0.0;
                for d in 0..n {
                    v += deriv[d][idx(d, a, b, c)];
                    for e in 0..n {
                        v += gm(d, d, e) * cur.r(e, a, b, c)
                            - gm(e, d, a) * cur.r(d, e, b, c)
                            - gm(e, d, b) * cur.r(d, a, e, c)
                            - gm(e, d, c) * cur.r(d, a, b, e);
                    }
                }
                out[(a * n + b) * n + c] = v;
            }
        }
    }
    Ok(out)
}

/// Evaluates div R, the Bianchi residual and the scalar curvature at y.
pub fn check_point(chart: &ProductChart, profile: &ZonalProfile, y: &[f64], settings: &DivSettings) -> Result<PointCheck> {
    let div = div_r_tensor(chart, profile, y, settings)?;
    let metric = assemble_metric(chart, profile, y)?;
    let cur = curvature(&metric);
    Ok(PointCheck {
        y: y.to_vec(),
        div_r: div.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        bianchi: cur.bianchi_residual(),
        scalar: cur.scalar,
        det: metric.determinant(),
    })
}

/// div R at every point, in parallel.
pub fn div_r_residual(chart: &ProductChart, profile: &ZonalProfile, points: &[Vec<f64>], settings: &DivSettings) -> Result<Vec<PointCheck>> {
    points.par_iter().map(|y| check_point(chart, profile, y, settings)).collect()
}

/// Settings for the full comparison against the trivial product and a
/// perturbed control.
#[derive(Debug, Clone, Serialize)]
pub struct Verify4dSettings {
    pub points: usize,
    pub margin: f64,
    pub div: DivSettings,
    /// Relative amplitude of the control perturbation f(1 + δ cos 2s).
    pub perturbation: f64,
    pub floor_factor: f64,
    pub control_factor: f64,
    pub scalar_tol: f64,
    /// Relative threshold below which x coefficients are treated as noise.
    pub denoise: f64,
}

impl Default for Verify4dSettings {
    fn default() -> Self {
        Verify4dSettings {
            points: 32,
            margin: 0.2,
            div: DivSettings::default(),
            perturbation: 0.01,
            floor_factor: 10.0,
            control_factor: 1e3,
            scalar_tol: 1e-4,
            denoise: 1e-15,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verify4dReport {
    pub solution: Vec<PointCheck>,
    pub noise_floor: f64,
    pub solution_max: f64,
    pub control_max: f64,
    pub bianchi_max: f64,
    pub scalar_expected: f64,
    pub scalar_mean: f64,
    /// max |scalar − expected| / |expected| over the points.
    pub scalar_relative_error: f64,
    pub within_floor: bool,
    pub control_separated: bool,
    pub scalar_ok: bool,
    pub passed: bool,
}

/// Runs the oracle on a zonal solution, the trivial product with the same
/// (θ, ε), and the perturbed control, at the same quasi-random points.
pub fn verify_4d(
    surface: &SurfaceDescriptor,
    params: &WarpParams,
    solution: &SolutionQuadruple,
    settings: &Verify4dSettings,
) -> Result<Verify4dReport> {
    let chart = ProductChart::new(params.p as usize, solution.eps, surface.khat(), settings.margin)?;
    let pts = chart.halton_points(settings.points, 0);
    let profile = ZonalProfile::from_solution(surface, params, &solution.x, settings.denoise)?;
    let trivial = ZonalProfile::constant(params.f_const());
    let control = ZonalProfile { bump: settings.perturbation, ..profile.clone() };
    let sol = div_r_residual(&chart, &profile, &pts, &settings.div)?;
    let triv = div_r_residual(&chart, &trivial, &pts, &settings.div)?;
    let ctl = div_r_residual(&chart, &control, &pts, &settings.div)?;
    let noise_floor = triv.iter().map(|c| c.div_r).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let solution_max = sol.iter().map(|c| c.div_r).fold(0.0, f64::max);
    let control_max = ctl.iter().map(|c| c.div_r).fold(0.0, f64::max);
    let bianchi_max = sol.iter().chain(&triv).map(|c| c.bianchi).fold(0.0, f64::max);
    let expected = 4.0 * (1.0 + 1.0 / params.p as f64) * solution.c;
    let scalar_mean = sol.iter().map(|c| c.scalar).sum::<f64>() / sol.len() as f64;
    let scalar_relative_error = sol.iter().map(|c| (c.scalar - expected).abs()).fold(0.0, f64::max) / expected.abs().max(f64::MIN_POSITIVE);
    let within_floor = solution_max <= settings.floor_factor * noise_floor;
    let control_separated = control_max >= settings.control_factor * solution_max;
    let scalar_ok = scalar_relative_error <= settings.scalar_tol;
    Ok(Verify4dReport {
        solution: sol,
        noise_floor,
        solution_max,
        control_max,
        bianchi_max,
        scalar_expected: expected,
        scalar_mean,
        scalar_relative_error,
        within_floor,
        control_separated,
        scalar_ok,
        passed: within_floor && control_separated && scalar_ok,
    })
}

#[cfg(test)]
mod tests;
