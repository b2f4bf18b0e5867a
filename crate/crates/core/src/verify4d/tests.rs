use super::*;
use crate::continuation::{trace_branch, NewtonSettings};
use crate::geometry::SurfaceKind;
use crate::spectra::eigenpairs;

fn sphere_branch(points: usize) -> (SurfaceDescriptor, crate::continuation::WarpBranch) {
    branch(SurfaceKind::ZonalSphere, 16, points)
}

fn branch(kind: SurfaceKind, modes: usize, points: usize) -> (SurfaceDescriptor, crate::continuation::WarpBranch) {
    let surf = SurfaceDescriptor::zonal_legendre(kind, modes, 1.0).unwrap();
    let pairs = eigenpairs(&surf, 3).unwrap();
    let br = trace_branch(&surf, 2, 1.0, &pairs[1], &NewtonSettings { max_points: points, ..NewtonSettings::default() }).unwrap();
    (surf, br)
}

#[test]
fn unit_product_has_flat_divergence() {
    let chart = ProductChart::new(2, 1.0, 1.0, 0.2).unwrap();
    let prof = ZonalProfile::constant(1.0);
    let pts = chart.halton_points(8, 0);
    for c in div_r_residual(&chart, &prof, &pts, &DivSettings::default()).unwrap() {
        assert!(c.div_r < 1e-6, "{c:?}");
        assert!(c.bianchi < 1e-12);
        // S² × S² with unit radii
        assert!((c.scalar - 4.0).abs() < 1e-12, "{}", c.scalar);
    }
}

#[test]
fn constant_profile_matches_closed_form() {
    for (p, eps, khat, f0) in [(2usize, 0.7, 1.3, 1.7), (3, 2.0, 0.5, 0.8), (5, 1.1, 2.0, 1.2)] {
        let chart = ProductChart::new(p, eps, khat, 0.2).unwrap();
        let prof = ZonalProfile::constant(f0);
        let big_f = f0.powf(4.0 / p as f64);
        for y in chart.halton_points(5, 3) {
            let m = assemble_metric(&chart, &prof, &y).unwrap();
            assert!(m.determinant() > 0.0);
            let cur = curvature(&m);
            let want = (2.0 * khat + p as f64 * eps) / big_f;
            assert!((cur.scalar - want).abs() < 1e-11 * want, "p={p}: {} vs {want}", cur.scalar);
            // Ricci is scale invariant: K̂ĝ on the base, εη on the fibre
            let n = chart.dim();
            for i in 0..n {
                let want = if i < 2 { khat / big_f * m.component(i, i) } else { eps / big_f * m.component(i, i) };
                assert!((cur.ricci[i * n + i] - want).abs() < 1e-10 * want.abs().max(1.0), "i={i}");
            }
        }
    }
}

#[test]
fn metric_is_positive_definite_on_branch() {
    let (surf, br) = sphere_branch(12);
    let sol = br.solution(&surf, 11).unwrap();
    let prof = ZonalProfile::from_fields(&surf, &sol.x, &sol.f).unwrap();
    let chart = ProductChart::new(2, sol.eps, 1.0, 0.2).unwrap();
    for y in chart.halton_points(16, 0) {
        assert!(assemble_metric(&chart, &prof, &y).unwrap().determinant() > 0.0);
    }
}

#[test]
fn interpolant_reproduces_nodal_fields() {
    let (surf, br) = sphere_branch(8);
    let sol = br.solution(&surf, 7).unwrap();
    let nodal = ZonalProfile::from_fields(&surf, &sol.x, &sol.f).unwrap();
    let derived = ZonalProfile::from_solution(&surf, &br.params_at(7).unwrap(), &sol.x, 0.0).unwrap();
    for (i, &s) in surf.colatitudes().iter().enumerate() {
        assert!((nodal.x.value(s) - sol.x.values()[i]).abs() < 1e-12);
        assert!((nodal.f_value(s) - sol.f.values()[i]).abs() < 1e-12);
        assert!((derived.f_value(s) - sol.f.values()[i]).abs() < 1e-11);
    }
}

#[test]
fn divergence_stencil_is_fourth_order() {
    let chart = ProductChart::new(2, 1.0, 1.0, 0.2).unwrap();
    let mut prof = ZonalProfile::constant(1.0);
    prof.f = ProfileF::Series(ZonalSeries { coeffs: vec![1.0, 0.05, 0.02] });
    prof.x.coeffs = vec![0.0, 0.03];
    let y = chart.halton_points(1, 5).remove(0);
    let at = |h: f64, richardson: bool| div_r_tensor(&chart, &prof, &y, &DivSettings { step: h, richardson }).unwrap();
    let reference = at(2.5e-3, true);
    let err = |v: Vec<f64>| v.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let e1 = err(at(0.1, false));
    let e2 = err(at(0.05, false));
    let order = (e1 / e2).log2();
    assert!((3.5..4.6).contains(&order), "order {order} ({e1:e}, {e2:e})");
    // the perturbed profile is genuinely non-harmonic
    assert!(reference.iter().fold(0.0f64, |m, v| m.max(v.abs())) > 1e-4);
}

#[test]
fn chart_boundary_is_rejected() {
    let chart = ProductChart::new(2, 1.0, 1.0, 0.2).unwrap();
    let prof = ZonalProfile::constant(1.0);
    let y = vec![0.1, 1.0, 1.0, 1.0];
    assert!(matches!(check_point(&chart, &prof, &y, &DivSettings::default()), Err(Error::ChartDomain(_))));
    let y = vec![0.2 + 1e-4, 1.0, 1.0, 1.0];
    assert!(matches!(check_point(&chart, &prof, &y, &DivSettings::default()), Err(Error::ChartDomain(_))));
    assert!(matches!(
        check_point(&chart, &prof, &[1.0, 1.0, 1.0, 1.0], &DivSettings { step: 1e-9, richardson: true }),
        Err(Error::StepUnderflow(_))
    ));
    assert!(ProductChart::new(2, -1.0, 1.0, 0.2).is_err());
}

#[test]
fn branch_solution_has_harmonic_curvature() {
    // K_max/K_min ≈ 1.2 here; further out the interpolant cannot carry the
    // five x-derivatives div R needs to the trivial floor in double precision
    let (surf, br) = sphere_branch(4);
    let k = 2;
    let params = br.params_at(k).unwrap();
    let sol = br.solution(&surf, k).unwrap();
    let rep = verify_4d(&surf, &params, &sol, &Verify4dSettings::default()).unwrap();
    assert!(rep.within_floor, "solution {:e} floor {:e}", rep.solution_max, rep.noise_floor);
    assert!(rep.control_separated, "control {:e} solution {:e}", rep.control_max, rep.solution_max);
    assert!(rep.scalar_ok, "scalar error {:e}", rep.scalar_relative_error);
    assert!(rep.bianchi_max < 1e-10);
    assert!(rep.passed);
}

#[test]
fn projective_plane_solution_has_harmonic_curvature() {
    let (surf, br) = branch(SurfaceKind::ZonalProjectivePlane, 12, 4);
    let sol = br.solution(&surf, 2).unwrap();
    let rep = verify_4d(&surf, &br.params_at(2).unwrap(), &sol, &Verify4dSettings::default()).unwrap();
    assert!(rep.passed, "{:e} {:e} {:e} {:e}", rep.solution_max, rep.noise_floor, rep.control_max, rep.scalar_relative_error);
}

#[test]
fn unconverged_profile_is_flagged() {
    let (surf, br) = sphere_branch(4);
    let params = br.params_at(2).unwrap();
    let mut sol = br.solution(&surf, 2).unwrap();
    let bent: Vec<f64> = sol.x.values().iter().zip(surf.colatitudes()).map(|(v, s)| v + 1e-4 * s.cos().powi(2)).collect();
    sol.x = ScalarField::new(&surf, bent).unwrap();
    let rep = verify_4d(&surf, &params, &sol, &Verify4dSettings::default()).unwrap();
    assert!(!rep.within_floor && !rep.passed);
}
