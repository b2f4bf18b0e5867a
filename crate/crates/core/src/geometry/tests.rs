use super::*;
use crate::legendre::{legendre, ZonalSeries};
use proptest::prelude::*;

fn sphere(n: usize) -> SurfaceDescriptor {
    SurfaceDescriptor::zonal_sphere(n, 1.0).unwrap()
}

fn max_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn constants_are_harmonic() {
    for s in [sphere(64), SurfaceDescriptor::zonal_projective_plane(32, 2.0).unwrap()] {
        let lu = laplacian_apply(&s, &ScalarField::constant(&s, 3.0)).unwrap();
        assert!(lu.values().iter().all(|v| v.abs() < 1e-11));
    }
    let m = SurfaceDescriptor::from_mesh(icosphere(2), None).unwrap();
    let lu = laplacian_apply(&m, &ScalarField::constant(&m, 1.0)).unwrap();
    assert!(lu.values().iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn degree_one_eigenfunction_matches_series_oracle() {
    let s = sphere(256);
    let u = ScalarField::zonal(&s, f64::cos).unwrap();
    let lu = laplacian_apply(&s, &u).unwrap();
    // series oracle: cos s = P1(cos s), Laplacian from coefficients
    let series = ZonalSeries { coeffs: vec![0.0, 1.0] }.laplacian();
    let oracle: Vec<f64> = s.colatitudes().iter().map(|&t| series.value(t)).collect();
    let h = s.spacing();
    assert!(max_err(lu.values(), &oracle) < 2.0 * h * h);
}

#[test]
fn p2_eigenfunction() {
    let s = sphere(256);
    let u = ScalarField::zonal(&s, |t| legendre(2, t.cos())).unwrap();
    let lu = laplacian_apply(&s, &u).unwrap();
    let expected: Vec<f64> = u.values().iter().map(|v| -6.0 * v).collect();
    let h = s.spacing();
    assert!(max_err(lu.values(), &expected) < 10.0 * h * h);
}

#[test]
fn legendre_scheme_is_exact_on_harmonics() {
    let s = SurfaceDescriptor::zonal_legendre(SurfaceKind::ZonalSphere, 8, 2.0).unwrap();
    for deg in [1usize, 2, 5] {
        let u = ScalarField::zonal(&s, |t| legendre(deg, t.cos())).unwrap();
        let lu = laplacian_apply(&s, &u).unwrap();
        let lam = 2.0 * (deg * (deg + 1)) as f64;
        let expected: Vec<f64> = u.values().iter().map(|v| -lam * v).collect();
        assert!(max_err(lu.values(), &expected) < 1e-11);
    }
}

#[test]
fn convergence_order_at_least_two() {
    let mut errs = Vec::new();
    for n in [64, 128, 256] {
        let s = sphere(n);
        let u = ScalarField::zonal(&s, |t| legendre(4, t.cos())).unwrap();
        let lu = laplacian_apply(&s, &u).unwrap();
        let expected: Vec<f64> = u.values().iter().map(|v| -20.0 * v).collect();
        errs.push(max_err(lu.values(), &expected));
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.9, "observed order {order}");
    }
}

#[test]
fn curvature_examples() {
    let s = sphere(128);
    let k = gaussian_curvature(&s, &ScalarField::constant(&s, 0.0)).unwrap();
    assert!(k.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
    let k = gaussian_curvature(&s, &ScalarField::constant(&s, 2f64.ln())).unwrap();
    assert!(k.values().iter().all(|v| (v - 0.25).abs() < 1e-13));

    // linearization: K ≈ 1 + 4ε P2, checked against the nonlinear map
    let s = sphere(512);
    let eps = 1e-6;
    let x = ScalarField::zonal(&s, |t| eps * legendre(2, t.cos())).unwrap();
    let k = gaussian_curvature(&s, &x).unwrap();
    let h = s.spacing();
    for (kv, &t) in k.values().iter().zip(s.colatitudes()) {
        let lin = 1.0 + 4.0 * eps * legendre(2, t.cos());
        assert!((kv - lin).abs() < 10.0 * eps * eps + 10.0 * eps * h * h);
    }
}

#[test]
fn integration_examples() {
    let s = sphere(128);
    let zero = ScalarField::constant(&s, 0.0);
    let one = ScalarField::constant(&s, 1.0);
    assert!((integrate(&s, &zero, &one).unwrap() - 4.0 * PI).abs() < 1e-12);
    let rp = SurfaceDescriptor::zonal_projective_plane(64, 1.0).unwrap();
    assert!((area(&rp, &ScalarField::constant(&rp, 0.0)).unwrap() - 2.0 * PI).abs() < 1e-12);
    let k = gaussian_curvature(&s, &zero).unwrap();
    assert!((integrate(&s, &zero, &k).unwrap() - 4.0 * PI).abs() < 1e-12);
    let leg = SurfaceDescriptor::zonal_legendre(SurfaceKind::ZonalProjectivePlane, 6, 1.0).unwrap();
    assert!((area(&leg, &ScalarField::constant(&leg, 0.0)).unwrap() - 2.0 * PI).abs() < 1e-12);
}

#[test]
fn gradient_examples() {
    let s = sphere(512);
    let h = s.spacing();
    let zero = ScalarField::constant(&s, 0.0);
    let g = grad_norm_sq(&s, &zero, &ScalarField::constant(&s, 2.0)).unwrap();
    assert!(g.values().iter().all(|v| *v == 0.0));
    let u = ScalarField::zonal(&s, f64::cos).unwrap();
    let g = grad_norm_sq(&s, &zero, &u).unwrap();
    let exact: Vec<f64> = s.colatitudes().iter().map(|t| t.sin().powi(2)).collect();
    assert!(max_err(g.values(), &exact) < h * h);
    let g = grad_norm_sq(&s, &ScalarField::constant(&s, 2f64.ln()), &u).unwrap();
    let exact4: Vec<f64> = exact.iter().map(|v| v / 4.0).collect();
    assert!(max_err(g.values(), &exact4) < h * h);
}

#[test]
fn mesh_gradient_of_linear_function() {
    let m = SurfaceDescriptor::from_mesh(icosphere(3), Some(1.0)).unwrap();
    let zero = ScalarField::constant(&m, 0.0);
    let u = ScalarField::on_vertices(&m, |p| p[2]).unwrap();
    let g = grad_norm_sq(&m, &zero, &u).unwrap();
    // tangential gradient of z on the unit sphere: 1 − z²
    let mesh = m.mesh().unwrap();
    let err = g.values().iter().zip(&mesh.vertices).map(|(v, p)| (v - (1.0 - p[2] * p[2])).abs()).fold(0.0, f64::max);
    assert!(err < 0.05, "{err}");
}

#[test]
fn surface_validation() {
    assert!(SurfaceDescriptor::zonal_sphere(7, 1.0).is_err());
    assert!(SurfaceDescriptor::zonal_sphere(8, 0.0).is_err());
    assert!(SurfaceDescriptor::zonal_sphere(8, -1.0).is_err());
    let s = sphere(8);
    assert!(matches!(ScalarField::new(&s, vec![0.0; 3]), Err(Error::LengthMismatch { .. })));
    let mut v = vec![0.0; 9];
    v[4] = f64::NAN;
    assert!(matches!(ScalarField::new(&s, v), Err(Error::NonFinite { node: 4 })));
    assert_eq!(s.euler(), 2);
    let c = s.colatitudes();
    assert!(c.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(c[0], 0.0);
    assert!((c[8] - PI).abs() < 1e-15);
}

#[test]
fn mesh_euler_and_khat_default() {
    let m = SurfaceDescriptor::from_mesh(icosphere(2), None).unwrap();
    assert_eq!(m.euler(), 2);
    assert!((m.khat() * m.base_area() - 4.0 * PI).abs() < 1e-12);
}

#[test]
fn reduction_commutes_with_laplacian() {
    let s = sphere(32);
    let red = s.reduction();
    let u: Vec<f64> = (0..red.dim()).map(|i| (i as f64 * 0.3).sin()).collect();
    let full = s.laplacian().mul_vec(&red.expand(&u));
    let via = s.reduced_laplacian().mul_vec(&u);
    assert!(max_err(&red.restrict(&full), &via) < 1e-12);
    assert!(red.asymmetry(&full) < 1e-10);
    assert!((s.reduced_mass().iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
}

fn smooth_field(s: &SurfaceDescriptor, c: &[f64]) -> ScalarField {
    ScalarField::zonal(s, |t| c.iter().enumerate().map(|(k, a)| a * (k as f64 * t).cos()).sum()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn laplacian_symmetric_in_mass_product(
        a in prop::collection::vec(-1.0f64..1.0, 6),
        b in prop::collection::vec(-1.0f64..1.0, 6),
        legendre_scheme in any::<bool>(),
    ) {
        let s = if legendre_scheme {
            SurfaceDescriptor::zonal_legendre(SurfaceKind::ZonalSphere, 12, 1.0).unwrap()
        } else {
            sphere(128)
        };
        let u = smooth_field(&s, &a);
        let v = smooth_field(&s, &b);
        let lu = laplacian_apply(&s, &u).unwrap();
        let lv = laplacian_apply(&s, &v).unwrap();
        let m = s.mass();
        let l = crate::linalg::mdot(m, lu.values(), v.values());
        let r = crate::linalg::mdot(m, u.values(), lv.values());
        let nu = crate::linalg::mdot(m, u.values(), u.values()).sqrt();
        let nv = crate::linalg::mdot(m, v.values(), v.values()).sqrt();
        prop_assert!((l - r).abs() < 1e-10 * nu * nv);
        let total: f64 = m.iter().zip(lu.values()).map(|(w, x)| w * x).sum();
        prop_assert!(total.abs() < 1e-9 * nu);
    }

    #[test]
    fn gauss_bonnet_for_random_conformal_factor(
        a in prop::collection::vec(-0.3f64..0.3, 5),
        kind in 0usize..3,
    ) {
        let (s, chi) = match kind {
            0 => (sphere(256), 2.0),
            1 => (SurfaceDescriptor::zonal_projective_plane(256, 1.0).unwrap(), 1.0),
            _ => (SurfaceDescriptor::zonal_sphere(300, 4.0).unwrap(), 2.0),
        };
        let x = smooth_field(&s, &a);
        let k = gaussian_curvature(&s, &x).unwrap();
        let total = integrate(&s, &x, &k).unwrap();
        prop_assert!((total - 2.0 * PI * chi).abs() < 1e-6 * 2.0 * PI * chi);
    }

    #[test]
    fn mesh_laplacian_symmetric(seed in 0u64..1000) {
        let m = SurfaceDescriptor::from_mesh(icosphere(2), Some(1.0)).unwrap();
        let n = m.len();
        let u: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) as f64 * 0.37).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| ((i as u64 * 17 + 3 * seed) as f64 * 0.11).cos()).collect();
        let lu = m.laplacian().mul_vec(&u);
        let lv = m.laplacian().mul_vec(&v);
        let w = m.mass();
        let l = crate::linalg::mdot(w, &lu, &v);
        let r = crate::linalg::mdot(w, &u, &lv);
        let nu = crate::linalg::mdot(w, &u, &u).sqrt();
        let nv = crate::linalg::mdot(w, &v, &v).sqrt();
        prop_assert!((l - r).abs() < 1e-10 * nu * nv);
    }
}
