//! Checks on the two-equation uniqueness argument: the curvature
//! functions Σ(K), Z(K), the ODE they must satisfy, and their large-|K|
//! asymptotics.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{conformal_laplacian, gaussian_curvature, grad_norm_sq, ScalarField, SurfaceDescriptor};
use crate::tolerances::NONCONSTANT_K;

/// Two competing normalized equations with constants (ε, μ) and (ε̃, μ̃),
/// ε̃ < ε, sharing the fibre dimension p > 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessData {
    pub p: f64,
    pub eps: f64,
    pub eps_tilde: f64,
    pub mu: f64,
    pub mu_tilde: f64,
}

/// Which of the three maximal intervals avoiding ω = 0 and ω̃ = 0 holds K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KInterval {
    Lower,
    Middle,
    Upper,
}

/// Value and first two K-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Jet {
    v: f64,
    d: f64,
    dd: f64,
}

impl Jet {
    fn mul(self, o: Jet) -> Jet {
        Jet { v: self.v * o.v, d: self.d * o.v + self.v * o.d, dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd }
    }

    fn sub(self, o: Jet) -> Jet {
        Jet { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }

    fn scale(self, s: f64) -> Jet {
        Jet { v: s * self.v, d: s * self.d, dd: s * self.dd }
    }
}

/// Σ and Z with derivatives at one K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaZJet {
    pub k: f64,
    pub sigma: f64,
    pub sigma_d: f64,
    pub z: f64,
    pub z_d: f64,
    pub z_dd: f64,
}

impl SigmaZJet {
    /// (2Z′ − Σ)(Z′ − Σ) − 2(Z″ − Σ′ − K)Z.
    pub fn gap(&self) -> f64 {
        self.lhs() - self.rhs()
    }

    pub fn lhs(&self) -> f64 {
        (2.0 * self.z_d - self.sigma) * (self.z_d - self.sigma)
    }

    pub fn rhs(&self) -> f64 {
        2.0 * (self.z_dd - self.sigma_d - self.k) * self.z
    }
}

impl UniquenessData {
    pub fn new(p: f64, eps: f64, eps_tilde: f64, mu: f64, mu_tilde: f64) -> Result<Self> {
        if ![p, eps, eps_tilde, mu, mu_tilde].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("uniqueness data must be finite".into()));
        }
        if !(p > 2.0) {
            return Err(Error::Constraint(format!("p > 2 required, got {p}")));
        }
        if !(eps_tilde < eps) {
            return Err(Error::Constraint(format!("eps_tilde < eps required, got {eps_tilde} and {eps}")));
        }
        Ok(UniquenessData { p, eps, eps_tilde, mu, mu_tilde })
    }

    pub fn omega(&self, k: f64) -> f64 {
        (self.p - 1.0) * k + self.eps
    }

    pub fn omega_tilde(&self, k: f64) -> f64 {
        (self.p - 1.0) * k + self.eps_tilde
    }

    pub fn gamma(&self, k: f64) -> f64 {
        self.omega(k).signum()
    }

    pub fn gamma_tilde(&self, k: f64) -> f64 {
        self.omega_tilde(k).signum()
    }

    pub fn theta(&self, k: f64) -> f64 {
        theta_jet(self.p, self.eps, self.mu, self.omega(k), k).v
    }

    pub fn theta_tilde(&self, k: f64) -> f64 {
        theta_jet(self.p, self.eps_tilde, self.mu_tilde, self.omega_tilde(k), k).v
    }

    /// The ω-zeros in increasing order: ε/(1−p) < ε̃/(1−p).
    pub fn breakpoints(&self) -> (f64, f64) {
        (self.eps / (1.0 - self.p), self.eps_tilde / (1.0 - self.p))
    }

    pub fn interval_of(&self, k: f64) -> Option<KInterval> {
        let (a, b) = self.breakpoints();
        if k < a {
            Some(KInterval::Lower)
        } else if k > a && k < b {
            Some(KInterval::Middle)
        } else if k > b {
            Some(KInterval::Upper)
        } else {
            None
        }
    }

    /// Σ, Z and their derivatives by the product rule on closed-form jets
    /// of ω, ω̃, Θ, Θ̃.
    pub fn jet(&self, k: f64) -> Result<SigmaZJet> {
        if !k.is_finite() || self.interval_of(k).is_none() {
            return Err(Error::Domain(format!("K = {k} makes omega or omega_tilde vanish")));
        }
        let p = self.p;
        let de = self.eps - self.eps_tilde;
        let w = self.omega(k);
        let wt = self.omega_tilde(k);
        let jw = Jet { v: w, d: p - 1.0, dd: 0.0 };
        let jwt = Jet { v: wt, d: p - 1.0, dd: 0.0 };
        let th = theta_jet(p, self.eps, self.mu, w, k);
        let tht = theta_jet(p, self.eps_tilde, self.mu_tilde, wt, k);
        let a = jwt.mul(jwt).mul(tht).sub(jw.mul(jw).mul(th));
        let sigma = a.scale(1.0 / (2.0 * (p + 1.0) * de));
        let b = jw.mul(jwt).mul(jwt.mul(tht).sub(jw.mul(th)));
        let z = b.scale(1.0 / (2.0 * (p + 1.0) * (3.0 * p - 2.0) * de));
        Ok(SigmaZJet { k, sigma: sigma.v, sigma_d: sigma.d, z: z.v, z_d: z.d, z_dd: z.dd })
    }
}

/// Θ = 2K + pε − μ|ω|^{2/(1−p)} with its K-derivatives.
fn theta_jet(p: f64, eps: f64, mu: f64, w: f64, k: f64) -> Jet {
    let aw = w.abs();
    let g = w.signum();
    Jet {
        v: 2.0 * k + p * eps - mu * aw.powf(2.0 / (1.0 - p)),
        d: 2.0 + 2.0 * g * mu * aw.powf((1.0 + p) / (1.0 - p)),
        dd: -2.0 * (p + 1.0) * mu * aw.powf(2.0 * p / (1.0 - p)),
    }
}

/// (Σ(K), Z(K)).
pub fn sigma_z(data: &UniquenessData, k: f64) -> Result<(f64, f64)> {
    let j = data.jet(k)?;
    Ok((j.sigma, j.z))
}

/// Left minus right side of the ODE linking Σ and Z.
pub fn zpm_gap(data: &UniquenessData, k: f64) -> Result<f64> {
    Ok(data.jet(k)?.gap())
}

/// The positive quartic whose product with (p−1)³(p−2) separates the two
/// K⁴ limits.
pub fn separating_quartic(p: f64) -> f64 {
    (((12.0 * p - 23.0) * p + 55.0) * p - 56.0) * p + 60.0
}

/// The same quartic in the split form p²(p−1)(12p−11) + 4(11p²−14p+15),
/// in exact integer arithmetic; returns (first part, second part).
pub fn separating_quartic_split(p: i64) -> (i64, i64) {
    (p * p * (p - 1) * (12 * p - 11), 4 * (11 * p * p - 14 * p + 15))
}

pub fn separating_quartic_int(p: i64) -> i64 {
    (((12 * p - 23) * p + 55) * p - 56) * p + 60
}

/// One scaled large-|K| quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitQuantity {
    /// 2(p+1)Σ/K²
    Sigma,
    /// (p+1)Σ′/K
    SigmaPrime,
    /// 2(p+1)(3p−2)Z/K³
    Z,
    /// 2(p+1)(3p−2)Z′/K²
    ZPrime,
    /// (p+1)(3p−2)Z″/K
    ZSecond,
    /// 4[(p+1)(3p−2)]²(2Z′−Σ)(Z′−Σ)/K⁴
    LeftQuartic,
    /// 8[(p+1)(3p−2)]²(Z″−Σ′−K)Z/K⁴
    RightQuartic,
    /// Difference of the two previous ones.
    Gap,
}

impl LimitQuantity {
    pub const ALL: [LimitQuantity; 8] = [
        LimitQuantity::Sigma,
        LimitQuantity::SigmaPrime,
        LimitQuantity::Z,
        LimitQuantity::ZPrime,
        LimitQuantity::ZSecond,
        LimitQuantity::LeftQuartic,
        LimitQuantity::RightQuartic,
        LimitQuantity::Gap,
    ];

    pub fn evaluate(self, p: f64, j: &SigmaZJet) -> f64 {
        let k = j.k;
        let q = (p + 1.0) * (3.0 * p - 2.0);
        match self {
            LimitQuantity::Sigma => 2.0 * (p + 1.0) * j.sigma / (k * k),
            LimitQuantity::SigmaPrime => (p + 1.0) * j.sigma_d / k,
            LimitQuantity::Z => 2.0 * q * j.z / k.powi(3),
            LimitQuantity::ZPrime => 2.0 * q * j.z_d / (k * k),
            LimitQuantity::ZSecond => q * j.z_dd / k,
            LimitQuantity::LeftQuartic => 4.0 * q * q * j.lhs() / k.powi(4),
            LimitQuantity::RightQuartic => 4.0 * q * q * j.rhs() / k.powi(4),
            LimitQuantity::Gap => 4.0 * q * q * j.gap() / k.powi(4),
        }
    }

    /// Closed-form limit as |K| → ∞.
    pub fn expected(self, p: f64) -> f64 {
        let a = p * p - p + 2.0;
        match self {
            LimitQuantity::Sigma | LimitQuantity::SigmaPrime => -(p - 1.0) * (p * p - p + 4.0),
            LimitQuantity::Z => -(p - 1.0).powi(2) * a,
            LimitQuantity::ZPrime => -3.0 * (p - 1.0).powi(2) * a,
            LimitQuantity::ZSecond => -3.0 * (p - 1.0) * a,
            LimitQuantity::LeftQuartic => {
                -(p - 1.0).powi(2) * (p - 2.0) * (p * p + 5.0 * p - 2.0) * (3.0 * p * p - p + 2.0)
            }
            LimitQuantity::RightQuartic => {
                -4.0 * (p - 1.0).powi(2) * (p - 2.0) * a * (((3.0 * p - 5.0) * p + 12.0) * p - 8.0)
            }
            LimitQuantity::Gap => (p - 1.0).powi(3) * (p - 2.0) * separating_quartic(p),
        }
    }

    /// Limit implied by term-wise differentiation of the Σ and Z
    /// asymptotics (Z ~ CK³ forces Z″ ~ 6CK). Differs from `expected`
    /// for the Z″ quantity and the two that depend on it.
    pub fn derived(self, p: f64) -> f64 {
        let a = p * p - p + 2.0;
        match self {
            LimitQuantity::ZSecond => -3.0 * (p - 1.0).powi(2) * a,
            LimitQuantity::RightQuartic => -4.0 * (p - 2.0) * (p - 1.0).powi(2) * a * (p * p + 3.0 * p - 2.0),
            LimitQuantity::Gap => (p - 6.0) * (p - 2.0) * (p - 1.0).powi(4) * (p + 2.0),
            other => other.expected(p),
        }
    }
}

/// Sampling and extrapolation controls.
#[derive(Debug, Clone, Serialize)]
pub struct LimitSettings {
    /// |K| sample magnitudes, increasing.
    pub magnitudes: Vec<f64>,
    pub rel_tol: f64,
}

impl Default for LimitSettings {
    fn default() -> Self {
        LimitSettings { magnitudes: vec![1e4, 1e5, 1e6], rel_tol: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitEntry {
    pub quantity: LimitQuantity,
    /// +1 for K → +∞, −1 for K → −∞.
    pub side: i8,
    pub samples: Vec<(f64, f64)>,
    pub extrapolated: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub passed: bool,
    pub derived: f64,
    pub derived_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub data: UniquenessData,
    /// Correction exponents eliminated by the extrapolation.
    pub exponents: Vec<f64>,
    pub entries: Vec<LimitEntry>,
    /// Θ or Θ̃ changes sign between consecutive samples (recorded only).
    pub theta_sign_changes: usize,
    pub passed: bool,
}

/// Powers of 1/|K| in the expansion of the scaled quantities: integer
/// steps from the polynomial part and steps of 2/(p−1) from the μ terms.
pub fn correction_exponents(p: f64, count: usize) -> Vec<f64> {
    let s = 2.0 / (p - 1.0);
    let mut e: Vec<f64> = Vec::new();
    for a in 0..=count {
        for j in 0..=count {
            let v = a as f64 * s + j as f64;
            if v > 0.0 && !e.iter().any(|x| (x - v).abs() < 1e-9) {
                e.push(v);
            }
        }
    }
    e.sort_by(|a, b| a.total_cmp(b));
    e.truncate(count);
    e
}

/// Generalized Richardson: the constant term of Q(h) = c₀ + Σ cᵢ h^{eᵢ}
/// through the samples (h, Q).
pub fn richardson(samples: &[(f64, f64)], exponents: &[f64]) -> Result<f64> {
    let n = samples.len();
    if exponents.len() + 1 != n {
        return Err(Error::InvalidInput(format!("{n} samples cannot eliminate {} exponents", exponents.len())));
    }
    let a = DMatrix::from_fn(n, n, |i, j| if j == 0 { 1.0 } else { samples[i].0.powf(exponents[j - 1]) });
    let b = DVector::from_iterator(n, samples.iter().map(|s| s.1));
    let sol = a.lu().solve(&b).ok_or_else(|| Error::Singular("extrapolation exponents are not distinct".into()))?;
    Ok(sol[0])
}

/// Evaluates every scaled quantity at ±|K| for the configured magnitudes
/// and extrapolates to |K| = ∞.
pub fn limit_suite(data: &UniquenessData, settings: &LimitSettings) -> Result<LimitReport> {
    let mags = &settings.magnitudes;
    if mags.len() < 2 || mags.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidInput("need at least two positive sample magnitudes".into()));
    }
    let exps = correction_exponents(data.p, mags.len() - 1);
    let mut entries = Vec::new();
    let mut theta_sign_changes = 0;
    for side in [1i8, -1] {
        let jets: Vec<SigmaZJet> = mags.iter().map(|m| data.jet(side as f64 * m)).collect::<Result<_>>()?;
        let thetas: Vec<(f64, f64)> = jets.iter().map(|j| (data.theta(j.k), data.theta_tilde(j.k))).collect();
        theta_sign_changes += thetas
            .windows(2)
            .filter(|w| w[0].0.signum() != w[1].0.signum() || w[0].1.signum() != w[1].1.signum())
            .count();
        for q in LimitQuantity::ALL {
            let samples: Vec<(f64, f64)> = mags.iter().zip(&jets).map(|(m, j)| (1.0 / m, q.evaluate(data.p, j))).collect();
            let extrapolated = richardson(&samples, &exps)?;
            let expected = q.expected(data.p);
            let rel = |c: f64| (extrapolated - c).abs() / c.abs().max(f64::MIN_POSITIVE);
            let relative_error = rel(expected);
            let derived = q.derived(data.p);
            entries.push(LimitEntry {
                quantity: q,
                side,
                samples,
                extrapolated,
                expected,
                relative_error,
                passed: relative_error <= settings.rel_tol,
                derived,
                derived_error: rel(derived),
            });
        }
    }
    let passed = entries.iter().all(|e| e.passed);
    Ok(LimitReport { data: *data, exponents: exps, entries, theta_sign_changes, passed })
}

/// Scatter of one fitted dependence Y = F(K).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitScatter {
    /// RMS fit residual over max|Y|.
    pub relative: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoparametricReport {
    pub laplacian: FitScatter,
    pub gradient: FitScatter,
    pub k_min: f64,
    pub k_max: f64,
    /// Largest of the two relative scatters.
    pub scatter: f64,
}

/// Fits ΔK and g(∇K, ∇K) as functions of K for the metric e^{2x}ĝ.
/// Zonal profiles are split into monotone pieces in colatitude; mesh
/// data is fitted as one cloud.
pub fn isoparametric_check(surface: &SurfaceDescriptor, x: &ScalarField) -> Result<IsoparametricReport> {
    let k = gaussian_curvature(surface, x)?;
    let kv = k.values();
    let (k_min, k_max) = (k.min(), k.max());
    if k_max - k_min <= NONCONSTANT_K * k_max.abs().max(k_min.abs()).max(1.0) {
        return Err(Error::Degenerate("curvature is constant; functional dependence is vacuous".into()));
    }
    let lap = conformal_laplacian(surface, x, &k)?.into_values();
    let grad = grad_norm_sq(surface, x, &k)?.into_values();

    let segments: Vec<Vec<usize>> = match surface.scheme() {
        Some(_) => {
            let mut order: Vec<usize> = (0..kv.len()).collect();
            let col = surface.colatitudes();
            order.sort_by(|a, b| col[*a].total_cmp(&col[*b]));
            monotone_pieces(&order, kv, (k_max - k_min) * 1e-12)
        }
        None => vec![(0..kv.len()).collect()],
    };
    let laplacian = fit_scatter(&segments, kv, &lap);
    let gradient = fit_scatter(&segments, kv, &grad);
    Ok(IsoparametricReport { scatter: laplacian.relative.max(gradient.relative), laplacian, gradient, k_min, k_max })
}

fn monotone_pieces(order: &[usize], k: &[f64], flat: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut cur = vec![order[0]];
    let mut dir = 0.0f64;
    for w in order.windows(2) {
        let d = k[w[1]] - k[w[0]];
        let s = if d.abs() <= flat { 0.0 } else { d.signum() };
        if s != 0.0 && dir != 0.0 && s != dir {
            // the extremum belongs to both pieces
            let last = *cur.last().unwrap();
            out.push(std::mem::replace(&mut cur, vec![last]));
            dir = s;
        } else if s != 0.0 {
            dir = s;
        }
        cur.push(w[1]);
    }
    out.push(cur);
    out
}

/// Least-squares Chebyshev fit per piece; pieces sharing a K range are
/// also cross-checked against each other's fits.
fn fit_scatter(segments: &[Vec<usize>], k: &[f64], y: &[f64]) -> FitScatter {
    let ymax = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut fits = Vec::new();
    let mut sq = 0.0;
    let mut count = 0usize;
    for seg in segments.iter().filter(|s| s.len() >= 4) {
        let ks: Vec<f64> = seg.iter().map(|&i| k[i]).collect();
        let ys: Vec<f64> = seg.iter().map(|&i| y[i]).collect();
        let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let deg = (seg.len() / 3).clamp(1, 16);
        let fit = ChebFit::new(&ks, &ys, lo, hi, deg);
        for (kk, yy) in ks.iter().zip(&ys) {
            sq += (fit.eval(*kk) - yy).powi(2);
            count += 1;
        }
        fits.push(fit);
    }
    for (a, fa) in fits.iter().enumerate() {
        for (b, seg) in segments.iter().filter(|s| s.len() >= 4).enumerate() {
            if a == b {
                continue;
            }
            for &i in seg {
                if k[i] > fa.lo && k[i] < fa.hi {
                    sq += (fa.eval(k[i]) - y[i]).powi(2);
                    count += 1;
                }
            }
        }
    }
    let rms = if count == 0 { 0.0 } else { (sq / count as f64).sqrt() };
    FitScatter { relative: rms / ymax, segments: fits.len() }
}

struct ChebFit {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl ChebFit {
    fn basis(&self, k: f64, n: usize) -> Vec<f64> {
        let s = if self.hi > self.lo { (2.0 * k - self.lo - self.hi) / (self.hi - self.lo) } else { 0.0 };
        let mut t = vec![1.0; n];
        if n > 1 {
            t[1] = s;
        }
        for j in 2..n {
            t[j] = 2.0 * s * t[j - 1] - t[j - 2];
        }
        t
    }

    fn new(ks: &[f64], ys: &[f64], lo: f64, hi: f64, deg: usize) -> Self {
        let mut fit = ChebFit { lo, hi, coeffs: vec![] };
        let n = (deg + 1).min(ks.len());
        let a = DMatrix::from_fn(ks.len(), n, |i, j| fit.basis(ks[i], n)[j]);
        let b = DVector::from_column_slice(ys);
        let svd = a.svd(true, true);
        let c = svd.solve(&b, 1e-13).unwrap_or_else(|_| DVector::zeros(n));
        fit.coeffs = c.iter().copied().collect();
        fit
    }

    fn eval(&self, k: f64) -> f64 {
        self.basis(k, self.coeffs.len()).iter().zip(&self.coeffs).map(|(b, c)| b * c).sum()
    }
}

#[cfg(test)]
mod tests;
