use super::*;
use crate::geometry::{gaussian_curvature, SurfaceKind};
use crate::residuals::{eps_of_theta, verify_solution, VerifyTolerances};
use crate::spectra::eigenpairs;
use proptest::prelude::*;

fn legendre_sphere() -> SurfaceDescriptor {
    SurfaceDescriptor::zonal_legendre(SurfaceKind::ZonalSphere, 32, 1.0).unwrap()
}

fn short_settings(points: usize) -> NewtonSettings {
    NewtonSettings { max_points: points, ..NewtonSettings::default() }
}

#[test]
fn interval_examples() {
    let iv = admissible_interval(2, 1.0, 1.0).unwrap();
    assert!((iv.lo - 1.0 / 3.0).abs() < 1e-15 && iv.hi.is_infinite());
    let iv = admissible_interval(2, 1.0, -1.0).unwrap();
    assert_eq!(iv.lo, 0.0);
    let iv = admissible_interval(3, -1.0, -1.0).unwrap();
    assert!(iv.lo == 0.0 && (iv.hi - 3.0 / 16.0).abs() < 1e-15);
    assert!(admissible_interval(2, -1.0, -1.0).is_err());
    assert!(admissible_interval(3, -1.0, 1.0).is_err());
    // boundary values are rejected, not clamped
    assert!(!trivial_point(2, 1.0, 1.0, 1.0 / 3.0).unwrap().admissible);
    assert!(trivial_point(2, 1.0, 1.0, 0.34).unwrap().admissible);
}

#[test]
fn delta_examples() {
    let d = delta_of_lambda(2, 1.0, 1.0, 6.0).unwrap();
    assert!((d - 2.0).abs() < 1e-14);
    assert!((eps_of_theta(2, 1.0, 1.0, d) - 5.0).abs() < 1e-12);
    let d = delta_of_lambda(3, -1.0, -1.0, 0.9).unwrap();
    assert!((d - 3.0 / 160.0).abs() < 1e-15);
    assert!(delta_of_lambda(3, -1.0, -1.0, 2.0).is_err());
}

proptest! {
    #[test]
    fn trivial_point_admissibility(p in 2u32..7, rpos in any::<bool>(), kpos in any::<bool>(), u in 0.001f64..0.999) {
        let r = if rpos { 1.0 } else { -1.0 };
        let khat = if kpos { 1.0 } else { -1.0 };
        prop_assume!(r > 0.0 || (p > 2 && khat < 0.0));
        let iv = admissible_interval(p, r, khat).unwrap();
        let hi = if iv.hi.is_finite() { iv.hi } else { iv.lo + 10.0 };
        // sample slightly beyond both ends
        let theta = (iv.lo + (hi - iv.lo) * (1.2 * u - 0.1)).max(1e-6);
        let tp = trivial_point(p, r, khat, theta).unwrap();
        let pf = p as f64;
        let lam = 2.0 * (pf - 1.0 / pf) * r * theta - (pf - 2.0) * khat;
        prop_assert!((tp.eps - (2.0 * (pf - 1.0 / pf) * r * theta - (pf - 1.0) * khat)).abs() < 1e-12);
        let c4p = (2.0 * (pf - 1.0) * r * theta - (pf - 2.0) * khat) * theta.powf(2.0 / (pf - 1.0));
        prop_assert!((4.0 * tp.c / pf - c4p).abs() < 1e-12 * c4p.abs().max(1.0));
        prop_assert_eq!(tp.admissible, tp.eps > 0.0 && tp.c > 0.0 && lam > 0.0);
        prop_assert_eq!(tp.admissible, iv.contains(theta));
    }
}

#[test]
fn trivial_residual_vanishes_across_interval() {
    for p in [2u32, 3, 4] {
        for r in [1.0, -1.0] {
            for khat in [1.0, -1.0] {
                let Ok(iv) = admissible_interval(p, r, khat) else { continue };
                let surf = if khat > 0.0 {
                    SurfaceDescriptor::zonal_sphere(64, khat).unwrap()
                } else {
                    SurfaceDescriptor::from_mesh(crate::geometry::icosphere(2), Some(khat)).unwrap()
                };
                let x = ScalarField::constant(&surf, 0.0);
                let hi = if iv.hi.is_finite() { iv.hi } else { iv.lo + 20.0 };
                for k in 1..=50 {
                    let theta = iv.lo + (hi - iv.lo) * k as f64 / 51.0;
                    let prm = WarpParams::on_trivial_curve(p, r, khat, theta).unwrap();
                    let res = residual_lt(&surf, &prm, &x).unwrap();
                    assert!(res.max().abs().max(res.min().abs()) < 1e-12, "p={p} r={r} K={khat} theta={theta}");
                }
            }
        }
    }
}

#[test]
fn linearization_matches_numerical_jacobian_on_leading_modes() {
    for surf in [SurfaceDescriptor::zonal_sphere(128, 1.0).unwrap(), legendre_sphere()] {
        let base = WarpParams::from_lambda(2, 1.0, 1.0, 6.0, 0.0).unwrap();
        let prob = WarpProblem::new(&surf, base);
        let lin = linearization_at_trivial(&surf, &base);
        let red = surf.reduction();
        let modes = eigenpairs(&surf, 10).unwrap();
        let n = prob.dim();
        let mut num = DMatrix::<f64>::zeros(n, 10);
        let mut ana = DMatrix::<f64>::zeros(n, 10);
        let h = 1e-6;
        for (k, m) in modes.iter().take(10).enumerate() {
            let v = red.restrict(m.phi.values());
            let xp: Vec<f64> = v.iter().map(|a| h * a).collect();
            let xm: Vec<f64> = v.iter().map(|a| -h * a).collect();
            let fp = prob.residual(&xp, 0.0).unwrap();
            let fm = prob.residual(&xm, 0.0).unwrap();
            let lv = &lin * nalgebra::DVector::from_column_slice(&v);
            for i in 0..n {
                num[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
                ana[(i, k)] = lv[i];
            }
        }
        let diff = (&num - &ana).singular_values().max();
        let scale = ana.singular_values().max();
        assert!(diff < 1e-5 * scale, "relative operator error {}", diff / scale);
        // the analytic Jacobian coincides with the factored form at x = 0
        let (jx, _) = prob.jacobian(&vec![0.0; n], 0.0).unwrap();
        assert!((&jx - &lin).amax() < 1e-9 * lin.amax());
    }
}

#[test]
fn kernel_at_crossing_is_one_dimensional() {
    let surf = legendre_sphere();
    let base = WarpParams::from_lambda(2, 1.0, 1.0, 6.0, 0.0).unwrap();
    let mut sv: Vec<f64> = linearization_at_trivial(&surf, &base).singular_values().iter().copied().collect();
    sv.sort_by(|a, b| a.total_cmp(b));
    assert!(sv[0] < 1e-8 * sv[sv.len() - 1]);
    assert!(sv[1] > 1e-3);
    // away from t = 0 the smallest singular value stays positive
    for t in [-0.3, -0.1, 0.1, 0.3] {
        let prm = base.with_t(t).unwrap();
        let s = linearization_at_trivial(&surf, &prm).singular_values().min();
        assert!(s > 1e-3, "t={t} sigma={s}");
    }
}

#[test]
fn scan_finds_sphere_and_projective_plane_crossings() {
    for surf in [
        SurfaceDescriptor::zonal_sphere(512, 1.0).unwrap(),
        SurfaceDescriptor::zonal_projective_plane(512, 1.0).unwrap(),
        legendre_sphere(),
    ] {
        let pairs = eigenpairs(&surf, 4).unwrap();
        let cr = bifurcation_scan(&surf, 2, 1.0, (0.5, 10.0), &pairs).unwrap();
        let thetas: Vec<f64> = cr.iter().map(|c| c.theta_star).collect();
        assert_eq!(thetas.len(), 2, "{thetas:?}");
        assert!((thetas[0] - 2.0).abs() < 1e-3);
        assert!((thetas[1] - 20.0 / 3.0).abs() < 1e-2);
        assert_eq!(cr[0].l, Some(1));
        assert!((cr[0].eps - (cr[0].lambda - 1.0)).abs() < 1e-10);
        let below = bifurcation_scan(&surf, 2, 1.0, (0.34, 1.9), &pairs).unwrap();
        assert!(below.is_empty());
    }
    let surf = legendre_sphere();
    let pairs = eigenpairs(&surf, 4).unwrap();
    assert!(bifurcation_scan(&surf, 2, 1.0, (0.2, 3.0), &pairs).is_err());
}

#[test]
fn sphere_branch_diagnostics() {
    let surf = legendre_sphere();
    let pairs = eigenpairs(&surf, 3).unwrap();
    let br = trace_branch(&surf, 2, 1.0, &pairs[1], &short_settings(20)).unwrap();
    let st = &br.state;
    assert_eq!(st.len(), 20);
    assert_eq!(st.termination, Termination::MaxPoints);
    assert!(st.transversal_angle > 1e-3);
    assert!(st.points.windows(2).all(|w| w[1].arclength > w[0].arclength));

    // first point: curvature perturbation along the kernel
    let sol = br.solution(&surf, 0).unwrap();
    let k = gaussian_curvature(&surf, &sol.x).unwrap();
    let dk: Vec<f64> = k.values().iter().map(|v| v - 1.0).collect();
    let u = st.kernel.values();
    let cos = crate::linalg::mdot(surf.mass(), &dk, u)
        / (crate::linalg::mdot(surf.mass(), &dk, &dk) * crate::linalg::mdot(surf.mass(), u, u)).sqrt();
    assert!(cos.abs() > 0.999, "cosine {cos}");

    let limit = br.eps_area_limit(&surf).unwrap();
    let expected = 2.0 * std::f64::consts::PI * (-1.0 + 6.0) * 2.0;
    assert!((limit - expected).abs() < 0.01 * expected, "limit {limit}");

    // ratio K_max/K_min grows away from the origin
    let ratios: Vec<f64> = (0..6).map(|i| {
        let h = br.homothety(&surf, i).unwrap();
        h.k_max / h.k_min
    }).collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");

    // (εA, pair) separates the sampled points
    let hs: Vec<_> = (0..st.len()).map(|i| br.homothety(&surf, i).unwrap()).collect();
    for i in 0..hs.len() {
        for j in i + 1..hs.len() {
            let d = (hs[i].eps_area - hs[j].eps_area).abs()
                + (hs[i].pair.0 - hs[j].pair.0).abs()
                + (hs[i].pair.1 - hs[j].pair.1).abs();
            assert!(d > 1e-6, "points {i} and {j} share homothety data");
        }
    }

    let tol = VerifyTolerances::for_surface(&surf);
    for i in 0..st.len() {
        assert!(st.points[i].diagnostics.residual_max <= 100.0 * NewtonSettings::default().tol);
        let rep = verify_solution(&surf, &br.params_at(i).unwrap(), &br.solution(&surf, i).unwrap(), &tol).unwrap();
        assert!(rep.passed, "point {i}: {rep:?}");
    }
}

#[test]
fn fd_branch_starts_at_discrete_crossing() {
    let surf = SurfaceDescriptor::zonal_sphere(256, 1.0).unwrap();
    let pairs = eigenpairs(&surf, 3).unwrap();
    let br = trace_branch(&surf, 2, 1.0, &pairs[1], &short_settings(8)).unwrap();
    assert_eq!(br.state.len(), 8);
    let limit = br.eps_area_limit(&surf).unwrap();
    assert!((limit - 20.0 * std::f64::consts::PI).abs() < 0.01 * 20.0 * std::f64::consts::PI);
    let tol = VerifyTolerances::for_surface(&surf);
    let rep = verify_solution(&surf, &br.params_at(0).unwrap(), &br.solution(&surf, 0).unwrap(), &tol).unwrap();
    assert!(rep.passed, "{rep:?}");
}

#[test]
fn inadmissible_kernels_are_rejected() {
    let surf = legendre_sphere();
    let pairs = eigenpairs(&surf, 3).unwrap();
    // constant mode
    assert!(trace_branch(&surf, 2, 1.0, &pairs[0], &NewtonSettings::default()).is_err());
    let bad = NewtonSettings { ds: 1.0, ..NewtonSettings::default() };
    assert!(trace_branch(&surf, 2, 1.0, &pairs[1], &bad).is_err());
}

#[test]
fn halving_the_step_moves_points_by_less_than_tolerance() {
    let surf = legendre_sphere();
    let pairs = eigenpairs(&surf, 3).unwrap();
    let coarse = trace_branch(&surf, 2, 1.0, &pairs[1], &short_settings(10)).unwrap();
    let s_half = NewtonSettings { ds: 0.005, ds_max: 0.025, max_points: 40, adaptive: false, ..NewtonSettings::default() };
    let fine = trace_branch(&surf, 2, 1.0, &pairs[1], &s_half).unwrap();
    let prob = WarpProblem::new(&surf, coarse.base);
    let u = surf.reduction().restrict(coarse.state.kernel.values());
    let w = prob.weights().to_vec();
    let last_fine = fine.state.raw.points.last().unwrap();
    let reach = wdot(&w, &last_fine.x, &u);
    let tol = NewtonSettings::default().tol;
    let mut compared = 0;
    for p in &coarse.state.raw.points {
        let s = wdot(&w, &p.x, &u);
        if s.abs() > reach.abs() || s * reach < 0.0 {
            continue;
        }
        let Ok(q) = fine.state.locate(&prob, &u, s, &NewtonSettings::default()) else { continue };
        let dx = p.x.iter().zip(&q.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let d = dx.max((p.t - q.t).abs());
        assert!(d < 10.0 * tol, "coordinate {s}: difference {d}");
        compared += 1;
    }
    assert!(compared >= 3, "compared {compared}");
}

#[test]
fn yamabe_crossings_on_the_sphere() {
    let surf = legendre_sphere();
    for (q, a_star) in [(4.0, 3.0), (3.0, 6.0)] {
        let yb = yamabe_branch(&surf, (0.5 * a_star, 2.0 * a_star), q, &short_settings(15)).unwrap();
        assert!((yb.a_star - a_star).abs() < 1e-10);
        assert!(yb.state.len() >= 10);
        for (k, pt) in yb.state.points.iter().enumerate() {
            let f = &pt.x;
            let x = ScalarField::constant(&surf, 0.0);
            let res = crate::residuals::yamabe_residual(&surf, &x, f, yb.a_at(k), q).unwrap();
            assert!(res.max().abs().max(res.min().abs()) < 1e-8);
            assert!(f.min() > 0.0 && f.min() <= 1.0 && f.max() >= 1.0);
            assert!(f.max() - f.min() > 1e-6);
        }
        let found = yamabe_search(&surf, yb.a_at(yb.state.len() - 1), q, 16, 7).unwrap();
        assert!(!found.is_empty());
    }
    assert!(yamabe_branch(&surf, (0.5, 2.0), 4.0, &NewtonSettings::default()).is_err());
    assert!(yamabe_branch(&surf, (0.5, 5.0), 2.0, &NewtonSettings::default()).is_err());
}

#[test]
fn yamabe_below_first_crossing_has_only_constants() {
    let surf = legendre_sphere();
    let found = yamabe_search(&surf, 0.9, 4.0, 16, 1).unwrap();
    assert!(found.is_empty());
}

#[test]
fn jacobian_matches_finite_differences() {
    let surf = SurfaceDescriptor::zonal_sphere(64, 1.0).unwrap();
    let base = WarpParams::from_lambda(2, 1.0, 1.0, 6.0, 0.0).unwrap();
    let prob = WarpProblem::new(&surf, base);
    let n = prob.dim();
    let x: Vec<f64> = (0..n).map(|i| 0.01 * (i as f64 * 0.2).cos()).collect();
    let t = 0.05;
    let (j, jt) = prob.jacobian(&x, t).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let scale = j.amax();
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let fp = prob.residual(&xp, t).unwrap();
        let fm = prob.residual(&xm, t).unwrap();
        for i in 0..n {
            worst = worst.max(((fp[i] - fm[i]) / (2.0 * h) - j[(i, k)]).abs());
        }
    }
    let fp = prob.residual(&x, t + h).unwrap();
    let fm = prob.residual(&x, t - h).unwrap();
    let wt = (0..n).map(|i| ((fp[i] - fm[i]) / (2.0 * h) - jt[i]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-5 * scale);
    assert!(wt < 1e-6 * jt.iter().fold(1.0f64, |m, v| m.max(v.abs())));
}
