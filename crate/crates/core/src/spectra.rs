//! Low spectrum of −Δ̂ on the invariant subspace and selection of the
//! eigenvalues at which branches can bifurcate.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ScalarField, SurfaceDescriptor, SurfaceKind, ZonalScheme};
use crate::linalg::{mdot, tridiagonal_eigenpairs, Csr, EnvelopeCholesky};
use crate::tolerances::{CLUSTER_GAP, EIGEN_RESIDUAL, EXACT_EIGEN_MATCH, SIMPLICITY_FACTOR};

#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Eigenvalue of −Δ̂.
    pub lambda: f64,
    /// Mass-normalized eigenfunction on the full node set.
    pub phi: ScalarField,
    /// Size of the eigenvalue cluster within the invariant subspace.
    pub multiplicity_in_subspace: usize,
    /// Relative residual ‖Δ̂φ + λφ‖ / max(λ, 1).
    pub residual: f64,
    /// Relative distance to the nearest eigenvalue outside the cluster.
    pub gap: f64,
}

/// An eigenpair selected as a bifurcation eigenvalue.
#[derive(Debug, Clone)]
pub struct AdmissibleEigen {
    pub pair: EigenPair,
    /// Degree index l with λ = 2l(2l+1)K̂ (positive curvature only).
    pub l: Option<usize>,
    /// Closed-form eigenvalue 2l(2l+1)K̂ when known.
    pub exact: Option<f64>,
}

/// Tabular view used by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub lambda: f64,
    pub multiplicity: usize,
    pub admissible: bool,
}

/// Settings for the mesh eigensolver.
#[derive(Debug, Clone, Copy)]
pub struct EigenSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings { tol: EIGEN_RESIDUAL, max_iter: 600, seed: 0x5eed }
    }
}

/// The `count` smallest eigenvalues of −Δ̂ on the invariant subspace
/// (even zonal functions on the sphere, zonal functions on the
/// projective plane, all functions on a mesh), ascending.
pub fn eigenpairs(surface: &SurfaceDescriptor, count: usize) -> Result<Vec<EigenPair>> {
    eigenpairs_with(surface, count, EigenSettings::default())
}

pub fn eigenpairs_with(surface: &SurfaceDescriptor, count: usize, settings: EigenSettings) -> Result<Vec<EigenPair>> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    let dim = surface.reduction().dim();
    if count > dim {
        return Err(Error::InvalidInput(format!("requested {count} eigenpairs but the subspace has dimension {dim}")));
    }
    // one extra pair so the last gap is meaningful
    let want = (count + 1).min(dim);
    let raw: Vec<(f64, Vec<f64>)> = match (surface.kind(), surface.scheme()) {
        (SurfaceKind::Mesh, _) => mesh_pairs(surface, want, settings)?,
        (_, Some(ZonalScheme::FiniteDifference)) => zonal_tridiagonal(surface, want),
        _ => dense_pairs(surface, want),
    };
    finish(surface, raw, count)
}

/// Symmetrized reduced operator −M^{1/2} Δ̂ M^{−1/2}.
fn symmetrized(surface: &SurfaceDescriptor) -> (Csr, Vec<f64>) {
    let m = surface.reduced_mass();
    let sq: Vec<f64> = m.iter().map(|v| v.sqrt()).collect();
    let isq: Vec<f64> = sq.iter().map(|v| 1.0 / v).collect();
    let t = surface.reduced_laplacian().scale_rows(&sq).scale_cols(&isq);
    let neg: Vec<f64> = vec![-1.0; m.len()];
    (t.scale_rows(&neg), isq)
}

fn zonal_tridiagonal(surface: &SurfaceDescriptor, want: usize) -> Vec<(f64, Vec<f64>)> {
    let (t, isq) = symmetrized(surface);
    let n = t.nrows();
    let d: Vec<f64> = (0..n).map(|i| t.get(i, i)).collect();
    // the fold makes the operator mildly nonsymmetric in the last row;
    // the geometric mean of the pair restores the symmetric form
    let e: Vec<f64> = (0..n - 1)
        .map(|i| {
            let a = t.get(i, i + 1);
            let b = t.get(i + 1, i);
            a.signum() * (a * b).abs().sqrt()
        })
        .collect();
    tridiagonal_eigenpairs(&d, &e, want)
        .into_iter()
        .map(|(l, v)| (l, v.iter().zip(&isq).map(|(a, b)| a * b).collect()))
        .collect()
}

fn dense_pairs(surface: &SurfaceDescriptor, want: usize) -> Vec<(f64, Vec<f64>)> {
    let (t, isq) = symmetrized(surface);
    let mut a = t.to_dense();
    let at = a.transpose();
    a = (a + at) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    idx.into_iter()
        .take(want)
        .map(|k| {
            let v: Vec<f64> = eig.eigenvectors.column(k).iter().zip(&isq).map(|(a, b)| a * b).collect();
            (eig.eigenvalues[k], v)
        })
        .collect()
}

/// Shift-invert subspace iteration with Rayleigh–Ritz for the
/// generalized problem A v = λ M v, A = −stiffness.
fn mesh_pairs(surface: &SurfaceDescriptor, want: usize, settings: EigenSettings) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = surface.len();
    let m = surface.mass().to_vec();
    let neg_m: Vec<f64> = m.iter().map(|v| -v).collect();
    let a = surface.laplacian().scale_rows(&neg_m);
    let tau = surface.khat().abs();
    let shifted = a.add_diag(&m.iter().map(|v| tau * v).collect::<Vec<_>>());
    let chol = EnvelopeCholesky::factor(&shifted)?;
    let block = (want + want / 2 + 4).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut x: Vec<Vec<f64>> = (0..block).map(|_| (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
    let mut worst = f64::INFINITY;
    for it in 0..settings.max_iter {
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|xi| chol.solve(&xi.iter().zip(&m).map(|(u, w)| u * w).collect::<Vec<_>>()))
            .collect();
        let ay: Vec<Vec<f64>> = y.iter().map(|yi| a.mul_vec(yi)).collect();
        let k = y.len();
        let ab = DMatrix::from_fn(k, k, |i, j| y[i].iter().zip(&ay[j]).map(|(p, q)| p * q).sum::<f64>());
        let mb = DMatrix::from_fn(k, k, |i, j| mdot(&m, &y[i], &y[j]));
        let ab = (&ab + ab.transpose()) * 0.5;
        let mb = (&mb + mb.transpose()) * 0.5;
        let chol_b = mb.cholesky().ok_or_else(|| Error::Singular("Ritz mass matrix".into()))?;
        let linv = chol_b.l().try_inverse().ok_or_else(|| Error::Singular("Ritz factor".into()))?;
        let c = &linv * ab * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let coeff = linv.transpose() * &eig.eigenvectors;
        let mut new_x = Vec::with_capacity(k);
        let mut vals = Vec::with_capacity(k);
        for &col in &idx {
            let mut v = vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                let cj = coeff[(j, col)];
                v.iter_mut().zip(yj).for_each(|(a, b)| *a += cj * b);
            }
            new_x.push(v);
            vals.push(eig.eigenvalues[col]);
        }
        x = new_x;
        worst = 0.0;
        for (v, &lam) in x.iter().zip(&vals).take(want) {
            let av = a.mul_vec(v);
            let r: f64 = av.iter().zip(v.iter().zip(&m)).map(|(p, (q, w))| (p - lam * w * q).powi(2) / w).sum::<f64>().sqrt();
            let nv = mdot(&m, v, v).sqrt();
            worst = worst.max(r / nv / lam.abs().max(1.0));
        }
        if worst < settings.tol {
            return Ok(vals.into_iter().zip(x).take(want).collect());
        }
        if it + 1 == settings.max_iter {
            break;
        }
    }
    Err(Error::EigenNonConvergence { iterations: settings.max_iter, residual: worst })
}

fn same_cluster(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= CLUSTER_GAP * a.abs().max(b.abs()).max(1e-9 * scale)
}

fn finish(surface: &SurfaceDescriptor, raw: Vec<(f64, Vec<f64>)>, count: usize) -> Result<Vec<EigenPair>> {
    let red = surface.reduction();
    let m = surface.reduced_mass();
    let lams: Vec<f64> = raw.iter().map(|(l, _)| *l).collect();
    let scale = lams.iter().fold(0.0f64, |a, l| a.max(l.abs())).max(1.0);
    let mut out = Vec::with_capacity(count);
    for (k, (lambda, v)) in raw.into_iter().enumerate().take(count) {
        let lambda = if lambda.abs() < 1e-11 * scale { 0.0 } else { lambda };
        let nrm = mdot(m, &v, &v).sqrt();
        let mut phi: Vec<f64> = v.iter().map(|a| a / nrm).collect();
        let anchor = phi.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(i, _)| i).unwrap();
        let pivot = if phi[0].abs() > 1e-3 * phi[anchor].abs() { 0 } else { anchor };
        if phi[pivot] < 0.0 {
            phi.iter_mut().for_each(|a| *a = -*a);
        }
        let lphi = surface.apply_reduced_laplacian(&phi);
        let res: Vec<f64> = lphi.iter().zip(&phi).map(|(a, b)| a + lambda * b).collect();
        let residual = mdot(m, &res, &res).sqrt() / lambda.abs().max(1.0);
        let multiplicity = lams.iter().filter(|&&l| same_cluster(l, lambda, scale)).count();
        let gap = lams
            .iter()
            .enumerate()
            .filter(|&(j, &l)| j != k && !same_cluster(l, lambda, scale))
            .map(|(_, &l)| (l - lambda).abs() / lambda.abs().max(1.0))
            .fold(f64::INFINITY, f64::min);
        out.push(EigenPair {
            lambda,
            phi: ScalarField::new(surface, red.expand(&phi))?,
            multiplicity_in_subspace: multiplicity,
            residual,
            gap,
        });
    }
    Ok(out)
}

/// Checks the branch-sign rule: r < 0 requires p > 2 and K̂ < 0.
pub fn check_sign_rule(p: u32, r: f64, khat: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::Constraint(format!("p >= 2 required, got {p}")));
    }
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Constraint("r must be finite and nonzero".into()));
    }
    if r < 0.0 && p <= 2 {
        return Err(Error::Constraint("r < 0 requires p > 2".into()));
    }
    if r < 0.0 && khat >= 0.0 {
        return Err(Error::Constraint("r < 0 requires khat < 0".into()));
    }
    Ok(())
}

/// Degree l with λ = 2l(2l+1)K̂ within the matching tolerance.
pub fn even_degree_of(lambda: f64, khat: f64) -> Option<usize> {
    if khat <= 0.0 || lambda <= 0.0 {
        return None;
    }
    let j = 0.5 * (-1.0 + (1.0 + 4.0 * lambda / khat).sqrt());
    let l = (j / 2.0).round() as usize;
    if l == 0 {
        return None;
    }
    let exact = (2 * l * (2 * l + 1)) as f64 * khat;
    ((lambda - exact).abs() <= EXACT_EIGEN_MATCH * exact).then_some(l)
}

/// Whether a single eigenpair qualifies as a bifurcation eigenvalue.
pub fn is_admissible(pair: &EigenPair, p: u32, r: f64, khat: f64) -> bool {
    let lambda = pair.lambda;
    if lambda <= 0.0 || same_cluster(lambda, 2.0 * khat, lambda.abs().max(1.0)) {
        return false;
    }
    if pair.multiplicity_in_subspace != 1 {
        return false;
    }
    if khat > 0.0 {
        even_degree_of(lambda, khat).is_some()
    } else {
        (lambda + (p as f64 - 2.0) * khat) * r > 0.0 && pair.gap > SIMPLICITY_FACTOR * EIGEN_RESIDUAL
    }
}

/// Filters `pairs` to the eigenvalues from which λ-branches bifurcate.
pub fn admissible_lambdas(surface: &SurfaceDescriptor, p: u32, r: f64, pairs: &[EigenPair]) -> Result<Vec<AdmissibleEigen>> {
    let khat = surface.khat();
    check_sign_rule(p, r, khat)?;
    Ok(pairs
        .iter()
        .filter(|pr| is_admissible(pr, p, r, khat))
        .map(|pr| {
            let l = even_degree_of(pr.lambda, khat);
            AdmissibleEigen { pair: pr.clone(), l, exact: l.map(|l| (2 * l * (2 * l + 1)) as f64 * khat) }
        })
        .collect())
}

/// Spectrum listing with admissibility flags.
pub fn spectrum_table(surface: &SurfaceDescriptor, p: u32, r: f64, pairs: &[EigenPair]) -> Result<Vec<SpectrumRow>> {
    check_sign_rule(p, r, surface.khat())?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(index, pr)| SpectrumRow {
            index,
            lambda: pr.lambda,
            multiplicity: pr.multiplicity_in_subspace,
            admissible: is_admissible(pr, p, r, surface.khat()),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;

    #[test]
    fn zonal_sphere_even_spectrum() {
        let s = SurfaceDescriptor::zonal_sphere(512, 1.0).unwrap();
        let pairs = eigenpairs(&s, 4).unwrap();
        assert!(pairs[0].lambda.abs() < 1e-10);
        let c = pairs[0].phi.values()[0];
        assert!(pairs[0].phi.values().iter().all(|v| (v - c).abs() < 1e-10));
        for (pr, exact) in pairs[1..].iter().zip([6.0, 20.0, 42.0]) {
            assert!((pr.lambda - exact).abs() < 1e-3 * exact, "{} vs {exact}", pr.lambda);
            assert_eq!(pr.multiplicity_in_subspace, 1);
            assert!(pr.residual < 1e-8);
        }
    }

    #[test]
    fn projective_plane_matches_sphere_even_subspace() {
        let rp = SurfaceDescriptor::zonal_projective_plane(256, 1.0).unwrap();
        let sp = SurfaceDescriptor::zonal_sphere(512, 1.0).unwrap();
        let a = eigenpairs(&rp, 4).unwrap();
        let b = eigenpairs(&sp, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.lambda - y.lambda).abs() < 1e-9 * x.lambda.max(1.0));
        }
    }

    #[test]
    fn legendre_scheme_spectrum_is_exact() {
        let s = SurfaceDescriptor::zonal_legendre(SurfaceKind::ZonalSphere, 10, 1.0).unwrap();
        let pairs = eigenpairs(&s, 5).unwrap();
        for (k, pr) in pairs.iter().enumerate() {
            let exact = (2 * k * (2 * k + 1)) as f64;
            assert!((pr.lambda - exact).abs() < 1e-9 * exact.max(1.0));
        }
    }

    #[test]
    fn eigenfunctions_orthonormal() {
        let s = SurfaceDescriptor::zonal_sphere(256, 1.0).unwrap();
        let pairs = eigenpairs(&s, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let d = mdot(s.mass(), pairs[i].phi.values(), pairs[j].phi.values());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-8, "({i},{j}) -> {d}");
            }
        }
    }

    #[test]
    fn mesh_spectrum_multiplicities() {
        let m = SurfaceDescriptor::from_mesh(icosphere(2), Some(1.0)).unwrap();
        let pairs = eigenpairs(&m, 9).unwrap();
        assert!(pairs[0].lambda.abs() < 1e-8);
        for pr in &pairs[1..4] {
            assert!((pr.lambda - 2.0).abs() < 0.05 * 2.0);
        }
        // icosahedral symmetry keeps the degree-one triplet exactly degenerate
        assert_eq!(pairs[1].multiplicity_in_subspace, 3);
        assert!(pairs.windows(2).all(|w| w[1].lambda >= w[0].lambda - 1e-12));
    }

    fn synthetic(surface: &SurfaceDescriptor, lambda: f64) -> EigenPair {
        EigenPair {
            lambda,
            phi: ScalarField::constant(surface, 1.0),
            multiplicity_in_subspace: 1,
            residual: 0.0,
            gap: 1.0,
        }
    }

    #[test]
    fn admissible_examples() {
        let s = SurfaceDescriptor::zonal_sphere(256, 1.0).unwrap();
        let pairs = eigenpairs(&s, 3).unwrap();
        let adm = admissible_lambdas(&s, 2, 1.0, &pairs).unwrap();
        assert_eq!(adm.iter().map(|a| a.l.unwrap()).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(adm[0].exact, Some(6.0));

        let hyp = SurfaceDescriptor::from_mesh(icosphere(1), Some(-1.0)).unwrap();
        let pr = synthetic(&hyp, 0.9);
        assert!(admissible_lambdas(&hyp, 3, 1.0, std::slice::from_ref(&pr)).unwrap().is_empty());
        assert_eq!(admissible_lambdas(&hyp, 3, -1.0, std::slice::from_ref(&pr)).unwrap().len(), 1);
        let mut double = pr.clone();
        double.multiplicity_in_subspace = 2;
        assert!(admissible_lambdas(&hyp, 3, -1.0, &[double]).unwrap().is_empty());
    }

    #[test]
    fn sign_rule_rejections_name_the_inequality() {
        let s = SurfaceDescriptor::zonal_sphere(16, 1.0).unwrap();
        match admissible_lambdas(&s, 3, -1.0, &[]) {
            Err(Error::Constraint(msg)) => assert!(msg.contains("khat < 0")),
            other => panic!("{other:?}"),
        }
        let hyp = SurfaceDescriptor::from_mesh(icosphere(1), Some(-1.0)).unwrap();
        match admissible_lambdas(&hyp, 2, -1.0, &[]) {
            Err(Error::Constraint(msg)) => assert!(msg.contains("p > 2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_khat_rejected() {
        let m = SurfaceDescriptor::from_mesh(icosphere(1), Some(1.0)).unwrap();
        assert!(!is_admissible(&synthetic(&m, 2.0), 2, 1.0, 1.0));
        assert!(is_admissible(&synthetic(&m, 6.0), 2, 1.0, 1.0));
    }
}
