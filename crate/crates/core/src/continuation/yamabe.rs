//! Bifurcation from f ≡ 1 for Δf − af + af^{q−1} = 0 on x = 0.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{switch_and_continue, wnorm2, NewtonSettings, Problem, Termination};
use super::BranchState;
use crate::error::{Error, Result};
use crate::geometry::{ScalarField, SurfaceDescriptor};
use crate::residuals::yamabe_raw;
use crate::spectra::{eigenpairs, EigenPair};

/// Unknown f on the reduced space; parameter t = a − a*.
pub struct YamabeProblem<'a> {
    surface: &'a SurfaceDescriptor,
    pub a_star: f64,
    pub q: f64,
    pub a_range: (f64, f64),
    lap: DMatrix<f64>,
    weights: Vec<f64>,
}

impl<'a> YamabeProblem<'a> {
    pub fn new(surface: &'a SurfaceDescriptor, a_star: f64, q: f64, a_range: (f64, f64)) -> Self {
        let m = surface.reduced_mass();
        let total: f64 = m.iter().sum();
        YamabeProblem {
            surface,
            a_star,
            q,
            a_range,
            lap: surface.reduced_laplacian().to_dense(),
            weights: m.iter().map(|v| v / total).collect(),
        }
    }

    fn residual_at(&self, f: &[f64], a: f64) -> Vec<f64> {
        let lf = self.surface.apply_reduced_laplacian(f);
        yamabe_raw(&lf, &vec![0.0; f.len()], f, a, self.q)
    }

    fn jacobian_at(&self, f: &[f64], a: f64) -> DMatrix<f64> {
        let mut j = self.lap.clone();
        for (i, fi) in f.iter().enumerate() {
            j[(i, i)] += -a + a * (self.q - 1.0) * fi.powf(self.q - 2.0);
        }
        j
    }
}

impl Problem for YamabeProblem<'_> {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn residual(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if let Some(i) = f.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!("f must stay positive (node {i})")));
        }
        Ok(self.residual_at(f, self.a_star + t))
    }

    fn jacobian(&self, f: &[f64], t: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let jt = f.iter().map(|v| -v + v.powf(self.q - 1.0)).collect();
        Ok((self.jacobian_at(f, self.a_star + t), jt))
    }

    fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, f: &[f64], t: f64) -> std::result::Result<(), Termination> {
        let a = self.a_star + t;
        if a < self.a_range.0 || a > self.a_range.1 {
            return Err(Termination::ParameterRange);
        }
        if f.iter().any(|v| !(*v > 0.0)) {
            return Err(Termination::PositivityLoss);
        }
        let spread = f.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        if spread < 1e-8 {
            return Err(Termination::ConstantCurvature);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct YamabeBranch {
    pub q: f64,
    /// Crossing a* = λ₁/(q − 2).
    pub a_star: f64,
    pub lambda: f64,
    /// Points hold f; a = a* + t.
    pub state: BranchState,
}

impl YamabeBranch {
    pub fn a_at(&self, k: usize) -> f64 {
        self.a_star + self.state.points[k].t
    }
}

/// Continues nonconstant solutions from f ≡ 1 at the first crossing
/// a(q − 2) = λ₁ inside `a_range`.
pub fn yamabe_branch(surface: &SurfaceDescriptor, a_range: (f64, f64), q: f64, settings: &NewtonSettings) -> Result<YamabeBranch> {
    if !(q > 2.0) {
        return Err(Error::Domain(format!("q must exceed 2, got {q}")));
    }
    let pairs = eigenpairs(surface, 2)?;
    let first: &EigenPair = &pairs[1];
    let a_star = first.lambda / (q - 2.0);
    if !(a_range.0 < a_star && a_star < a_range.1) {
        return Err(Error::Domain(format!("a range ({}, {}) does not contain the crossing {a_star}", a_range.0, a_range.1)));
    }
    let prob = YamabeProblem::new(surface, a_star, q, a_range);
    let u = surface.reduction().restrict(first.phi.values());
    let nrm = wnorm2(prob.weights(), &u).sqrt();
    let u: Vec<f64> = u.iter().map(|v| v / nrm).collect();
    let one = vec![1.0; u.len()];
    let raw = switch_and_continue(&prob, &one, &u, settings)?;
    let kernel = ScalarField::from_raw(surface.reduction().expand(&u));
    Ok(YamabeBranch { q, a_star, lambda: first.lambda, state: BranchState::from_raw(surface, raw, kernel) })
}

/// Damped Newton from `starts` seeded random perturbations of f ≡ 1 at
/// fixed a; returns the distinct nonconstant solutions found.
pub fn yamabe_search(surface: &SurfaceDescriptor, a: f64, q: f64, starts: usize, seed: u64) -> Result<Vec<ScalarField>> {
    let prob = YamabeProblem::new(surface, a, q, (0.0, f64::INFINITY));
    let modes = eigenpairs(surface, 6)?;
    let red = surface.reduction();
    let basis: Vec<Vec<f64>> = modes[1..].iter().map(|m| red.restrict(m.phi.values())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<Vec<f64>> = Vec::new();
    for _ in 0..starts {
        let amp = rng.random_range(0.05..0.6);
        let coeffs: Vec<f64> = basis.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut pert = vec![0.0; prob.dim()];
        for (c, b) in coeffs.iter().zip(&basis) {
            pert.iter_mut().zip(b).for_each(|(p, v)| *p += c * v);
        }
        let scale = pert.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut f: Vec<f64> = pert.iter().map(|v| 1.0 + amp * v / scale).collect();
        let mut ok = false;
        for _ in 0..100 {
            let r = prob.residual_at(&f, a);
            let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rn < 1e-11 {
                ok = true;
                break;
            }
            let j = prob.jacobian_at(&f, a);
            let Some(d) = j.lu().solve(&DVector::from_iterator(r.len(), r.iter().map(|v| -v))) else { break };
            // backtrack on the residual norm, keeping f positive
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-4 {
                let trial: Vec<f64> = f.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
                if trial.iter().all(|v| *v > 0.0) {
                    let tn = prob.residual_at(&trial, a).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    if tn < rn * (1.0 - 1e-4 * step) || tn < 1e-11 {
                        f = trial;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if ok && f.iter().any(|v| (v - 1.0).abs() > 1e-6) && !found.iter().any(|g| g.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-6)) {
            found.push(f);
        }
    }
    Ok(found.into_iter().map(|f| ScalarField::from_raw(red.expand(&f))).collect())
}
