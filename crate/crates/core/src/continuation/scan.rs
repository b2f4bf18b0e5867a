//! Locating bifurcation points on the trivial curve.

use serde::Serialize;

use super::admissible_interval;
use crate::error::{Error, Result};
use crate::geometry::SurfaceDescriptor;
use crate::residuals::{eps_of_theta, lambda_of_theta, theta_of_lambda, WarpParams};
use crate::spectra::{even_degree_of, is_admissible, EigenPair};

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    /// Index into the eigenpair list.
    pub index: usize,
    /// Discrete eigenvalue.
    pub lambda: f64,
    /// θ* where the discrete linearization is singular.
    pub theta_star: f64,
    /// ε at θ*.
    pub eps: f64,
    /// Degree l and the corresponding closed-form values, when K̂ > 0.
    pub l: Option<usize>,
    pub lambda_exact: Option<f64>,
    pub theta_exact: Option<f64>,
}

/// Signed eigenvalue of the trivial linearization on the mode with
/// eigenvalue λ: positive scalar times (Λ(θ) − λ)(2K̂ − λ).
fn mode_value(p: u32, r: f64, khat: f64, lambda: f64, theta: f64) -> f64 {
    let pf = p as f64;
    let beta = pf / (2.0 - 2.0 * pf);
    let scale = theta.powf(beta - 1.0) / (4.0 * r * (1.0 - 1.0 / (pf * pf)));
    scale * (lambda_of_theta(p, r, khat, theta) - lambda) * (2.0 * khat - lambda)
}

/// Scans θ ∈ [lo, hi] for values where the linearization at x = 0 is
/// singular along an admissible eigenpair, refining by bisection on the
/// signed mode eigenvalue (its modulus is the smallest singular value
/// near the crossing).
pub fn bifurcation_scan(
    surface: &SurfaceDescriptor,
    p: u32,
    r: f64,
    theta_range: (f64, f64),
    pairs: &[EigenPair],
) -> Result<Vec<Crossing>> {
    let khat = surface.khat();
    let iv = admissible_interval(p, r, khat)?;
    let (lo, hi) = theta_range;
    if !(lo < hi) || !iv.contains(lo) || !(hi < iv.hi) {
        return Err(Error::Domain(format!("theta range [{lo}, {hi}] must lie inside ({}, {})", iv.lo, iv.hi)));
    }
    let samples = 256;
    let mut out = Vec::new();
    for (index, pr) in pairs.iter().enumerate() {
        if !is_admissible(pr, p, r, khat) {
            continue;
        }
        let g = |th: f64| mode_value(p, r, khat, pr.lambda, th);
        let grid: Vec<f64> = (0..=samples).map(|k| lo + (hi - lo) * k as f64 / samples as f64).collect();
        for w in grid.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            let (ga, gb) = (g(a), g(b));
            if ga == 0.0 || ga * gb < 0.0 {
                if ga != 0.0 {
                    for _ in 0..200 {
                        let m = 0.5 * (a + b);
                        if m <= a || m >= b {
                            break;
                        }
                        if g(a) * g(m) <= 0.0 {
                            b = m;
                        } else {
                            a = m;
                        }
                    }
                }
                let theta_star = if ga == 0.0 { a } else if g(a).abs() <= g(b).abs() { a } else { b };
                let l = even_degree_of(pr.lambda, khat);
                let lambda_exact = l.map(|l| (2 * l * (2 * l + 1)) as f64 * khat);
                out.push(Crossing {
                    index,
                    lambda: pr.lambda,
                    theta_star,
                    eps: eps_of_theta(p, r, khat, theta_star),
                    l,
                    lambda_exact,
                    theta_exact: lambda_exact.map(|le| theta_of_lambda(p, r, khat, le)),
                });
                break;
            }
        }
    }
    Ok(out)
}

impl Crossing {
    /// Parameters at the crossing, branch parameter zero.
    pub fn params(&self, p: u32, r: f64, khat: f64) -> Result<WarpParams> {
        WarpParams::from_lambda(p, r, khat, self.lambda, 0.0)
    }
}
