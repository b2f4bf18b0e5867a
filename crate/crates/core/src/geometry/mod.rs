//! Discretized base surfaces of constant curvature, conformal changes
//! g = e^{2x}ĝ, curvature and integration.
//!
//! Three surface kinds are supported: rotationally symmetric (zonal)
//! functions on the round sphere, zonal functions on the projective
//! plane (even functions on the upper hemisphere), and closed triangle
//! meshes. Zonal kinds come with two schemes: a conservative
//! second-order finite-difference grid and a Legendre collocation grid.

pub mod field_io;
pub mod mesh;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{gauss_legendre, legendre_with_derivatives};
use crate::linalg::Csr;
pub use mesh::{icosphere, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    ZonalSphere,
    ZonalProjectivePlane,
    Mesh,
}

/// Discretization of a zonal surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZonalScheme {
    /// Conservative central differences on a uniform colatitude grid.
    FiniteDifference,
    /// Collocation at Gauss–Legendre nodes in cos s.
    Legendre,
}

/// Maps full node vectors onto the invariant subspace used by the
/// solvers: antipodally even functions for the sphere, everything
/// otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    fold: Vec<usize>,
    rep: Vec<usize>,
}

impl Reduction {
    fn identity(n: usize) -> Self {
        Reduction { fold: (0..n).collect(), rep: (0..n).collect() }
    }

    /// Pairs node i with node n−1−i.
    fn mirror(n: usize) -> Self {
        let half = n.div_ceil(2);
        let fold = (0..n).map(|i| i.min(n - 1 - i)).collect();
        Reduction { fold, rep: (0..half).collect() }
    }

    pub fn dim(&self) -> usize {
        self.rep.len()
    }

    pub fn full_len(&self) -> usize {
        self.fold.len()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.rep.iter().map(|&i| full[i]).collect()
    }

    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        self.fold.iter().map(|&k| reduced[k]).collect()
    }

    /// Sums a full node weight over orbits.
    pub fn fold_weights(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, &k) in self.fold.iter().enumerate() {
            out[k] += w[i];
        }
        out
    }

    /// Restriction of an operator that preserves the subspace.
    pub fn reduce_operator(&self, a: &Csr) -> Csr {
        let mut trip = Vec::new();
        for (ri, &i) in self.rep.iter().enumerate() {
            for (j, v) in a.row(i) {
                trip.push((ri, self.fold[j], v));
            }
        }
        Csr::from_triplets(self.dim(), self.dim(), trip)
    }

    /// Largest deviation of `full` from the invariant subspace.
    pub fn asymmetry(&self, full: &[f64]) -> f64 {
        full.iter().enumerate().map(|(i, v)| (v - full[self.rep[self.fold[i]]]).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
enum Gradient {
    /// Colatitude derivative, unit-radius coordinates.
    Zonal(Csr),
    /// Hat-function gradients per triangle.
    Mesh { tri: Vec<[usize; 3]>, grads: Vec<[[f64; 3]; 3]>, areas: Vec<f64> },
}

/// A discretized closed surface with metric ĝ of constant curvature K̂.
#[derive(Debug, Clone)]
pub struct SurfaceDescriptor {
    kind: SurfaceKind,
    scheme: Option<ZonalScheme>,
    khat: f64,
    euler: i32,
    colatitudes: Vec<f64>,
    mesh: Option<TriMesh>,
    lap: Csr,
    mass: Vec<f64>,
    gradient: Gradient,
    reduction: Reduction,
    spacing: f64,
    negative_cotan: usize,
    reduced_lap: Csr,
    reduced_mass: Vec<f64>,
}

fn check_khat(khat: f64) -> Result<()> {
    if !khat.is_finite() || khat == 0.0 {
        return Err(Error::InvalidInput(format!("khat must be finite and nonzero, got {khat}")));
    }
    Ok(())
}

impl SurfaceDescriptor {
    fn assemble(
        kind: SurfaceKind,
        scheme: Option<ZonalScheme>,
        khat: f64,
        euler: i32,
        colatitudes: Vec<f64>,
        mesh: Option<TriMesh>,
        lap: Csr,
        mass: Vec<f64>,
        gradient: Gradient,
        reduction: Reduction,
        spacing: f64,
        negative_cotan: usize,
    ) -> Self {
        let reduced_lap = reduction.reduce_operator(&lap);
        let reduced_mass = reduction.fold_weights(&mass);
        SurfaceDescriptor {
            kind,
            scheme,
            khat,
            euler,
            colatitudes,
            mesh,
            lap,
            mass,
            gradient,
            reduction,
            spacing,
            negative_cotan,
            reduced_lap,
            reduced_mass,
        }
    }

    /// Zonal functions on the round sphere of curvature `khat > 0`, on a
    /// uniform grid of `n` intervals (n even, n ≥ 4).
    pub fn zonal_sphere(n: usize, khat: f64) -> Result<Self> {
        Self::zonal_fd(SurfaceKind::ZonalSphere, n, khat)
    }

    /// Zonal functions on the projective plane of curvature `khat > 0`:
    /// a uniform grid of `n` intervals on [0, π/2], Neumann at the equator.
    pub fn zonal_projective_plane(n: usize, khat: f64) -> Result<Self> {
        Self::zonal_fd(SurfaceKind::ZonalProjectivePlane, n, khat)
    }

    /// Legendre collocation with `modes` invariant (even) modes.
    pub fn zonal_legendre(kind: SurfaceKind, modes: usize, khat: f64) -> Result<Self> {
        check_khat(khat)?;
        if khat < 0.0 {
            return Err(Error::InvalidInput("zonal surfaces need khat > 0".into()));
        }
        if modes < 2 {
            return Err(Error::InvalidInput("at least two Legendre modes required".into()));
        }
        let r2 = 1.0 / khat;
        let (mu_all, w_all) = gauss_legendre(2 * modes);
        // ascending colatitude = descending mu
        let (mu, w, degrees, euler): (Vec<f64>, Vec<f64>, Vec<usize>, i32) = match kind {
            SurfaceKind::ZonalSphere => {
                (mu_all.iter().rev().copied().collect(), w_all.iter().rev().copied().collect(), (0..2 * modes).collect(), 2)
            }
            SurfaceKind::ZonalProjectivePlane => (
                mu_all[modes..].iter().rev().copied().collect(),
                w_all[modes..].iter().rev().copied().collect(),
                (0..modes).map(|k| 2 * k).collect(),
                1,
            ),
            SurfaceKind::Mesh => return Err(Error::InvalidInput("Legendre scheme is zonal only".into())),
        };
        let n = mu.len();
        let top = *degrees.last().unwrap();
        let mut v = DMatrix::zeros(n, n);
        let mut vd = DMatrix::zeros(n, n);
        for i in 0..n {
            let (p, dp, _) = legendre_with_derivatives(top, mu[i]);
            for (k, &d) in degrees.iter().enumerate() {
                v[(i, k)] = p[d];
                vd[(i, k)] = dp[d];
            }
        }
        let vinv = v.clone().try_inverse().ok_or_else(|| Error::Singular("Legendre Vandermonde".into()))?;
        let eig = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            degrees.iter().map(|&d| -((d * (d + 1)) as f64) * khat),
        ));
        let lap = &v * eig * &vinv;
        let sin_s: Vec<f64> = mu.iter().map(|m| (1.0 - m * m).sqrt()).collect();
        let mut ds = &vd * &vinv;
        for i in 0..n {
            for j in 0..n {
                ds[(i, j)] *= -sin_s[i];
            }
        }
        let mass: Vec<f64> = w.iter().map(|wi| 2.0 * PI * r2 * wi).collect();
        let colat: Vec<f64> = mu.iter().map(|m| m.acos()).collect();
        let reduction = match kind {
            SurfaceKind::ZonalSphere => Reduction::mirror(n),
            _ => Reduction::identity(n),
        };
        let spacing = PI / (2 * modes) as f64;
        Ok(Self::assemble(
            kind,
            Some(ZonalScheme::Legendre),
            khat,
            euler,
            colat,
            None,
            Csr::from_dense(&lap),
            mass,
            Gradient::Zonal(Csr::from_dense(&ds)),
            reduction,
            spacing,
            0,
        ))
    }

    fn zonal_fd(kind: SurfaceKind, n: usize, khat: f64) -> Result<Self> {
        check_khat(khat)?;
        if khat < 0.0 {
            return Err(Error::InvalidInput("zonal surfaces need khat > 0".into()));
        }
        let (end, euler) = match kind {
            SurfaceKind::ZonalSphere => {
                if n < 4 || n % 2 == 1 {
                    return Err(Error::InvalidInput(format!("zonal sphere needs an even n >= 4, got {n}")));
                }
                (PI, 2)
            }
            SurfaceKind::ZonalProjectivePlane => {
                if n < 2 {
                    return Err(Error::InvalidInput(format!("zonal projective plane needs n >= 2, got {n}")));
                }
                (PI / 2.0, 1)
            }
            SurfaceKind::Mesh => unreachable!(),
        };
        let h = end / n as f64;
        let r2 = 1.0 / khat;
        let s: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let mass: Vec<f64> = s
            .iter()
            .map(|&si| {
                let a = (si - 0.5 * h).max(0.0);
                let b = (si + 0.5 * h).min(end);
                2.0 * PI * r2 * (a.cos() - b.cos())
            })
            .collect();
        let mut stiff = Vec::with_capacity(4 * n);
        for i in 0..n {
            let w = 2.0 * PI * (s[i] + 0.5 * h).sin() / h;
            stiff.extend([(i, i + 1, w), (i + 1, i, w), (i, i, -w), (i + 1, i + 1, -w)]);
        }
        let inv_m: Vec<f64> = mass.iter().map(|m| 1.0 / m).collect();
        let lap = Csr::from_triplets(n + 1, n + 1, stiff).scale_rows(&inv_m);
        let mut grad = Vec::with_capacity(2 * n);
        for i in 1..n {
            grad.push((i, i + 1, 0.5 / h));
            grad.push((i, i - 1, -0.5 / h));
        }
        let reduction = match kind {
            SurfaceKind::ZonalSphere => Reduction::mirror(n + 1),
            _ => Reduction::identity(n + 1),
        };
        Ok(Self::assemble(
            kind,
            Some(ZonalScheme::FiniteDifference),
            khat,
            euler,
            s,
            None,
            lap,
            mass,
            Gradient::Zonal(Csr::from_triplets(n + 1, n + 1, grad)),
            reduction,
            h,
            0,
        ))
    }

    /// A closed orientable triangle mesh. `khat` defaults to the
    /// Gauss–Bonnet value 2πχ/area.
    pub fn from_mesh(mesh: TriMesh, khat: Option<f64>) -> Result<Self> {
        let topo = mesh.topology()?;
        mesh.check_nondegenerate()?;
        let area = mesh.area();
        let khat = match khat {
            Some(k) => k,
            None => 2.0 * PI * topo.euler as f64 / area,
        };
        check_khat(khat)?;
        let op = mesh.cotan_operator();
        let inv_m: Vec<f64> = op.mass.iter().map(|m| 1.0 / m).collect();
        let lap = op.stiffness.scale_rows(&inv_m);
        let grads = mesh.hat_gradients();
        let areas = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).collect();
        let n = mesh.vertices.len();
        let spacing = (area / mesh.triangles.len() as f64).sqrt();
        let tri = mesh.triangles.clone();
        Ok(Self::assemble(
            SurfaceKind::Mesh,
            None,
            khat,
            topo.euler,
            Vec::new(),
            Some(mesh),
            lap,
            op.mass,
            Gradient::Mesh { tri, grads, areas },
            Reduction::identity(n),
            spacing,
            op.negative_weights,
        ))
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn scheme(&self) -> Option<ZonalScheme> {
        self.scheme
    }

    pub fn is_zonal(&self) -> bool {
        self.kind != SurfaceKind::Mesh
    }

    pub fn khat(&self) -> f64 {
        self.khat
    }

    pub fn euler(&self) -> i32 {
        self.euler
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Colatitudes of the nodes (empty for meshes).
    pub fn colatitudes(&self) -> &[f64] {
        &self.colatitudes
    }

    pub fn mesh(&self) -> Option<&TriMesh> {
        self.mesh.as_ref()
    }

    /// Lumped ĝ-area of each node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Δ̂ on full node vectors.
    pub fn laplacian(&self) -> &Csr {
        &self.lap
    }

    /// Typical node spacing in unit-radius coordinates (zonal) or in the
    /// embedding (meshes); used for grid-indexed tolerances.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of edges with negative cotangent weight (meshes).
    pub fn negative_cotan_edges(&self) -> usize {
        self.negative_cotan
    }

    pub fn reduction(&self) -> &Reduction {
        &self.reduction
    }

    /// Δ̂ restricted to the invariant subspace.
    pub fn reduced_laplacian(&self) -> &Csr {
        &self.reduced_lap
    }

    pub fn reduced_mass(&self) -> &[f64] {
        &self.reduced_mass
    }

    /// ĝ-area.
    pub fn base_area(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Δ̂u on a raw full node vector.
    pub fn apply_laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.lap.mul_vec_differences(u)
    }

    /// Δ̂ on a raw reduced vector.
    pub fn apply_reduced_laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.reduced_lap.mul_vec_differences(u)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: n });
        }
        Ok(())
    }

    /// g(∇u,∇u) on raw node vectors.
    pub(crate) fn grad_norm_sq_raw(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match &self.gradient {
            Gradient::Zonal(d) => {
                let du = d.mul_vec(u);
                du.iter().zip(x).map(|(g, xi)| (-2.0 * xi).exp() * self.khat * g * g).collect()
            }
            Gradient::Mesh { tri, grads, areas } => {
                let n = self.len();
                let mut acc = vec![0.0; n];
                let mut wsum = vec![0.0; n];
                for (t, tr) in tri.iter().enumerate() {
                    let mut g = [0.0; 3];
                    for k in 0..3 {
                        for c in 0..3 {
                            g[c] += u[tr[k]] * grads[t][k][c];
                        }
                    }
                    let sq = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                    for &v in tr {
                        acc[v] += areas[t] * sq;
                        wsum[v] += areas[t];
                    }
                }
                (0..n).map(|i| (-2.0 * x[i]).exp() * acc[i] / wsum[i]).collect()
            }
        }
    }
}

/// A real value per node of a surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    /// Validates length and finiteness against `surface`.
    pub fn new(surface: &SurfaceDescriptor, values: Vec<f64>) -> Result<Self> {
        surface.check_len(values.len())?;
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(ScalarField { values })
    }

    pub fn constant(surface: &SurfaceDescriptor, c: f64) -> Self {
        ScalarField { values: vec![c; surface.len()] }
    }

    /// Zonal field from a function of the colatitude.
    pub fn zonal(surface: &SurfaceDescriptor, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !surface.is_zonal() {
            return Err(Error::InvalidInput("zonal field on a mesh surface".into()));
        }
        Self::new(surface, surface.colatitudes().iter().map(|&s| f(s)).collect())
    }

    /// Field from a function of the embedded vertex position.
    pub fn on_vertices(surface: &SurfaceDescriptor, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let mesh = surface.mesh().ok_or_else(|| Error::InvalidInput("vertex field on a zonal surface".into()))?;
        Self::new(surface, mesh.vertices.iter().map(|&p| f(p)).collect())
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ScalarField { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

fn validated<'a>(surface: &SurfaceDescriptor, u: &'a ScalarField) -> Result<&'a [f64]> {
    surface.check_len(u.len())?;
    if let Some(node) = u.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { node });
    }
    Ok(&u.values)
}

/// Δ̂u.
pub fn laplacian_apply(surface: &SurfaceDescriptor, u: &ScalarField) -> Result<ScalarField> {
    let u = validated(surface, u)?;
    Ok(ScalarField::from_raw(surface.apply_laplacian(u)))
}

pub(crate) fn curvature_raw(surface: &SurfaceDescriptor, x: &[f64]) -> Vec<f64> {
    let lx = surface.apply_laplacian(x);
    x.iter().zip(&lx).map(|(xi, l)| (-2.0 * xi).exp() * (surface.khat - l)).collect()
}

/// Gaussian curvature of g = e^{2x}ĝ.
pub fn gaussian_curvature(surface: &SurfaceDescriptor, x: &ScalarField) -> Result<ScalarField> {
    let x = validated(surface, x)?;
    Ok(ScalarField::from_raw(curvature_raw(surface, x)))
}

pub(crate) fn integrate_raw(surface: &SurfaceDescriptor, x: &[f64], u: &[f64]) -> f64 {
    surface.mass.iter().zip(x.iter().zip(u)).map(|(m, (xi, ui))| m * (2.0 * xi).exp() * ui).sum()
}

/// ∫ u dA_g for g = e^{2x}ĝ.
pub fn integrate(surface: &SurfaceDescriptor, x: &ScalarField, u: &ScalarField) -> Result<f64> {
    let x = validated(surface, x)?;
    let u = validated(surface, u)?;
    Ok(integrate_raw(surface, x, u))
}

/// Area of g = e^{2x}ĝ.
pub fn area(surface: &SurfaceDescriptor, x: &ScalarField) -> Result<f64> {
    integrate(surface, x, &ScalarField::constant(surface, 1.0))
}

/// g(∇u,∇u) node-wise.
pub fn grad_norm_sq(surface: &SurfaceDescriptor, x: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    let xv = validated(surface, x)?;
    let uv = validated(surface, u)?;
    Ok(ScalarField::from_raw(surface.grad_norm_sq_raw(xv, uv)))
}

/// g-Laplacian Δu = e^{−2x}Δ̂u.
pub fn conformal_laplacian(surface: &SurfaceDescriptor, x: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    let xv = validated(surface, x)?;
    let lu = laplacian_apply(surface, u)?;
    Ok(ScalarField::from_raw(lu.values.iter().zip(xv).map(|(l, xi)| (-2.0 * xi).exp() * l).collect()))
}

#[cfg(test)]
mod tests;
