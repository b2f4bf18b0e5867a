use super::*;
use crate::geometry::{icosphere, SurfaceKind};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

/// Σ and Z at p = 3, where |ω|^{2/(1−p)} = 1/|ω| keeps everything rational.
fn rational_sigma_z(eps: Q, eps_t: Q, mu: Q, mu_t: Q, k: Q) -> (Q, Q) {
    let p = q(3, 1);
    let w = (p - 1) * k + eps;
    let wt = (p - 1) * k + eps_t;
    let abs = |v: Q| if v < q(0, 1) { -v } else { v };
    let th = q(2, 1) * k + p * eps - mu / abs(w);
    let tht = q(2, 1) * k + p * eps_t - mu_t / abs(wt);
    let de = eps - eps_t;
    let sigma = (wt * wt * tht - w * w * th) / (q(2, 1) * (p + 1) * de);
    let z = w * wt * (wt * tht - w * th) / (q(2, 1) * (p + 1) * (q(3, 1) * p - 2) * de);
    (sigma, z)
}

fn to_f(v: Q) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

#[test]
fn rational_oracle_at_p3() {
    let d = UniquenessData::new(3.0, 2.0, 1.0, 0.0, 0.0).unwrap();
    assert_eq!(d.omega(1.0), 4.0);
    assert_eq!(d.omega_tilde(1.0), 3.0);
    assert_eq!(d.theta(1.0), 8.0);
    assert_eq!(d.theta_tilde(1.0), 5.0);
    let (s, z) = sigma_z(&d, 1.0).unwrap();
    assert!((s + 83.0 / 8.0).abs() < 1e-14 * 83.0 / 8.0);
    assert!((z + 51.0 / 14.0).abs() < 1e-14 * 51.0 / 14.0);

    let d = UniquenessData::new(3.0, 2.0, 1.0, 1.5, -0.5).unwrap();
    for k in [q(1, 1), q(-5, 1), q(-3, 4), q(7, 3)] {
        let (es, ez) = rational_sigma_z(q(2, 1), q(1, 1), q(3, 2), q(-1, 2), k);
        let (s, z) = sigma_z(&d, to_f(k)).unwrap();
        assert!((s - to_f(es)).abs() <= 1e-14 * to_f(es).abs().max(1.0), "K={k}");
        assert!((z - to_f(ez)).abs() <= 1e-14 * to_f(ez).abs().max(1.0), "K={k}");
    }
}

#[test]
fn degenerate_data_is_rejected() {
    assert!(UniquenessData::new(3.0, 1.0, 1.0, 0.0, 0.0).is_err());
    assert!(UniquenessData::new(3.0, 1.0, 2.0, 0.0, 0.0).is_err());
    assert!(UniquenessData::new(2.0, 2.0, 1.0, 0.0, 0.0).is_err());
    let d = UniquenessData::new(3.0, 2.0, 1.0, 0.0, 0.0).unwrap();
    let (a, b) = d.breakpoints();
    assert!(sigma_z(&d, a).is_err() && zpm_gap(&d, b).is_err());
    assert_eq!(d.interval_of(-10.0), Some(KInterval::Lower));
    assert_eq!(d.interval_of(-0.75), Some(KInterval::Middle));
    assert_eq!(d.interval_of(0.0), Some(KInterval::Upper));
}

proptest! {
    #[test]
    fn omega_difference_is_constant(p in 2.01f64..12.0, e in -3.0f64..3.0, de in 0.01f64..3.0, k in -50.0f64..50.0) {
        let d = UniquenessData::new(p, e, e - de, 0.3, -0.7).unwrap();
        prop_assert!((d.omega(k) - d.omega_tilde(k) - de).abs() < 1e-12 * (1.0 + k.abs() * p));
    }

    #[test]
    fn analytic_derivatives_match_central_differences(
        p in 2.2f64..9.0, e in 0.5f64..3.0, de in 0.2f64..2.0, mu in -2.0f64..2.0, mut_ in -2.0f64..2.0,
        k in 0.5f64..4.0, side in any::<bool>()
    ) {
        let d = UniquenessData::new(p, e, e - de, mu, mut_).unwrap();
        // keep K safely inside one interval
        let (a, b) = d.breakpoints();
        let k = if side { b + k } else { a - k };
        let j = d.jet(k).unwrap();
        let h = 1e-4;
        let jp = d.jet(k + h).unwrap();
        let jm = d.jet(k - h).unwrap();
        let rel = |num: f64, ana: f64, scale: f64| (num - ana).abs() / scale.max(1e-8);
        let s_scale = j.sigma.abs().max(j.sigma_d.abs()).max(1.0);
        let z_scale = j.z.abs().max(j.z_d.abs()).max(j.z_dd.abs()).max(1.0);
        prop_assert!(rel((jp.sigma - jm.sigma) / (2.0 * h), j.sigma_d, s_scale) < 1e-6);
        prop_assert!(rel((jp.z - jm.z) / (2.0 * h), j.z_d, z_scale) < 1e-6);
        prop_assert!(rel((jp.z_d - jm.z_d) / (2.0 * h), j.z_dd, z_scale) < 1e-6);
    }
}

#[test]
fn integer_identities() {
    assert_eq!(separating_quartic_int(2), 176);
    assert_eq!(separating_quartic_split(2), (52, 124));
    for p in 1..=40 {
        let (a, b) = separating_quartic_split(p);
        assert_eq!(a + b, separating_quartic_int(p));
    }
    assert_eq!(separating_quartic_int(3), 738);
    assert_eq!(LimitQuantity::Gap.expected(3.0), 5904.0);
    assert_eq!(LimitQuantity::LeftQuartic.expected(4.0), -28152.0);
    assert_eq!(LimitQuantity::Sigma.expected(3.0), -20.0);
    // factor (p−2) kills the gap coefficient at p = 2
    assert_eq!(LimitQuantity::Gap.expected(2.0), 0.0);
    // the two K⁴ constants differ by (p−1)³(p−2)·quartic, in integers
    for p in 3i64..=12 {
        let a = p * p - p + 2;
        let left = -(p - 1).pow(2) * (p - 2) * (p * p + 5 * p - 2) * (3 * p * p - p + 2);
        let right = -4 * (p - 1).pow(2) * (p - 2) * a * (3 * p.pow(3) - 5 * p * p + 12 * p - 8);
        assert_eq!(left - right, (p - 1).pow(3) * (p - 2) * separating_quartic_int(p));
    }
}

#[test]
fn quartic_is_positive_for_p_at_least_one() {
    let mut p = 1.0;
    while p <= 50.0 {
        assert!(separating_quartic(p) > 0.0, "p={p}");
        p += 1e-2;
    }
}

#[test]
fn limit_suite_reproduces_constants() {
    // the Z″ constant and the two quartic constants built on it are off by
    // a factor (p − 1) in the Z″ term; the rest match as claimed
    for p in [3.0, 4.0, 5.0, 8.0] {
        for (e, et, mu, mut_) in [(2.0, 1.0, 0.7, -1.3), (0.5, -1.5, -2.0, 0.4)] {
            let d = UniquenessData::new(p, e, et, mu, mut_).unwrap();
            let rep = limit_suite(&d, &LimitSettings::default()).unwrap();
            for en in &rep.entries {
                assert!(en.derived_error < 1e-3, "p={p} {:?} side {} got {} want {}", en.quantity, en.side, en.extrapolated, en.derived);
                let consistent = (en.derived - en.expected).abs() < 1e-12 * en.expected.abs();
                assert_eq!(en.passed, consistent, "p={p} {:?}", en.quantity);
            }
            let failing: Vec<_> = rep.entries.iter().filter(|e| !e.passed).map(|e| e.quantity).collect();
            assert_eq!(failing.len(), 6);
            assert!(failing.iter().all(|q| matches!(q, LimitQuantity::ZSecond | LimitQuantity::RightQuartic | LimitQuantity::Gap)));
            assert!(!rep.passed);
        }
    }
}

#[test]
fn richardson_recovers_known_expansion() {
    let f = |h: f64| 3.0 + 2.0 * h.powf(0.4) - 5.0 * h;
    let s: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4].iter().map(|h| (*h, f(*h))).collect();
    assert!((richardson(&s, &[0.4, 1.0]).unwrap() - 3.0).abs() < 1e-12);
    assert!(richardson(&s, &[1.0]).is_err());
    assert_eq!(correction_exponents(3.0, 2), vec![1.0, 2.0]);
    let e = correction_exponents(8.0, 3);
    assert!((e[0] - 2.0 / 7.0).abs() < 1e-12 && (e[1] - 4.0 / 7.0).abs() < 1e-12 && (e[2] - 6.0 / 7.0).abs() < 1e-12);
}

#[test]
fn constant_curvature_is_vacuous() {
    let surf = SurfaceDescriptor::zonal_legendre(SurfaceKind::ZonalSphere, 16, 1.0).unwrap();
    let x = ScalarField::constant(&surf, 0.0);
    assert!(matches!(isoparametric_check(&surf, &x), Err(Error::Degenerate(_))));
}

#[test]
fn zonal_branch_point_is_isoparametric() {
    use crate::continuation::{trace_branch, NewtonSettings};
    let surf = SurfaceDescriptor::zonal_legendre(SurfaceKind::ZonalSphere, 32, 1.0).unwrap();
    let pairs = crate::spectra::eigenpairs(&surf, 3).unwrap();
    let br = trace_branch(&surf, 2, 1.0, &pairs[1], &NewtonSettings { max_points: 12, ..NewtonSettings::default() }).unwrap();
    let x = &br.state.points[10].x;
    let rep = isoparametric_check(&surf, x).unwrap();
    assert!(rep.scatter < 1e-6, "{rep:?}");
}

#[test]
fn random_mesh_field_is_not_isoparametric() {
    let surf = SurfaceDescriptor::from_mesh(icosphere(3), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vals: Vec<f64> = (0..surf.len()).map(|_| rng.random_range(-0.01..0.01)).collect();
    let x = ScalarField::new(&surf, vals).unwrap();
    let rep = isoparametric_check(&surf, &x).unwrap();
    assert!(rep.scatter >= 1e-2, "{rep:?}");
}


#[test]
fn derived_gap_vanishes_at_p6() {
    assert_eq!(LimitQuantity::Gap.derived(6.0), 0.0);
    for p in [3.0, 4.0, 5.0, 8.0, 11.0] {
        let d = LimitQuantity::LeftQuartic.derived(p) - LimitQuantity::RightQuartic.derived(p);
        assert!((d - LimitQuantity::Gap.derived(p)).abs() < 1e-9 * d.abs().max(1.0));
    }
}
