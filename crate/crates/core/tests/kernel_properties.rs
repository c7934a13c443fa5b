use std::f64::consts::PI;

use gyrokin::kernel::{increment_identity, potential, transport, transport_parts};
use gyrokin::measures::{gamma_weight, kappa};
use gyrokin::mollify::MollifierSpec;
use gyrokin::quadrature::{integrate_adaptive, GaussLegendre};
use gyrokin::{PhasePoint, Vec2};
use proptest::prelude::*;

fn rotate(p: Vec2, th: f64) -> Vec2 {
    let (s, c) = th.sin_cos();
    Vec2(c * p.0 - s * p.1, s * p.0 + c * p.1)
}

fn planar() -> impl Strategy<Value = Vec2> {
    (-3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(a, b)| Vec2(a, b))
        .prop_filter("away from the origin", |p| p.norm() > 1e-3)
}

fn phase() -> impl Strategy<Value = PhasePoint> {
    (planar(), planar()).prop_map(|(x, v)| PhasePoint { x, v })
}

proptest! {
    #[test]
    fn transport_is_odd(z in phase()) {
        let a = transport(z).unwrap();
        let b = transport(z * -1.0).unwrap();
        prop_assert!((a + b).norm() <= 1e-15 * a.norm().max(1.0));
    }

    #[test]
    fn transport_rotates_with_both_planes(z in phase(), th in 0.0..(2.0 * PI)) {
        let zr = PhasePoint { x: rotate(z.x, th), v: rotate(z.v, th) };
        let a = rotate(transport(z).unwrap(), th);
        let b = transport(zr).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-3));
    }

    #[test]
    fn transport_screened_inside_gyro_disc(x in planar(), v in planar()) {
        let j = transport_parts(x, v).unwrap();
        if v.norm() > x.norm() {
            prop_assert_eq!(j, Vec2::ZERO);
        } else {
            prop_assert!((j.norm() - 1.0 / (2.0 * PI * x.norm())).abs() < 1e-12 / x.norm());
        }
    }

    #[test]
    fn potential_is_swap_symmetric(z in phase()) {
        prop_assert_eq!(potential(z).unwrap(), potential(z.swap()).unwrap());
    }

    #[test]
    fn potential_gradient_matches_transport(z in phase()) {
        // J = (-∂₂K, ∂₁K) in x away from the cone |x| = |v|
        prop_assume!((z.x.norm() - z.v.norm()).abs() > 1e-2);
        let h = 1e-6;
        let k = |d: Vec2| potential(PhasePoint { x: z.x + d, v: z.v }).unwrap();
        let g = Vec2(
            (k(Vec2(h, 0.0)) - k(Vec2(-h, 0.0))) / (2.0 * h),
            (k(Vec2(0.0, h)) - k(Vec2(0.0, -h))) / (2.0 * h),
        );
        let j = transport(z).unwrap();
        let grad_perp = Vec2(-g.1, g.0);
        prop_assert!((grad_perp - j).norm() < 1e-6 * (1.0 + j.norm()));
    }

    #[test]
    fn increment_identity_holds(x in planar(), y in planar()) {
        let id = increment_identity(x, y).unwrap();
        prop_assert!((id.lhs - id.rhs).abs() <= 1e-12 * id.rhs.max(1e-300));
        prop_assert!(id.relaxed >= id.rhs * (1.0 - 1e-14));
    }

    #[test]
    fn weight_ratio_bounded_by_distance(
        x in (-5.0..5.0f64, -5.0..5.0f64), y in (-5.0..5.0f64, -5.0..5.0f64)
    ) {
        let (x, y) = (Vec2(x.0, x.1), Vec2(y.0, y.1));
        prop_assert!((1.0 + x.norm()) / (1.0 + y.norm()) <= 1.0 + (x - y).norm() + 1e-15);
    }

    #[test]
    fn weight_is_product_of_planes(z in phase(), g in 2.1..6.0f64) {
        let w = gamma_weight(z, g);
        let expect = (1.0 + z.x.norm()).powf(g) * (1.0 + z.v.norm()).powf(g);
        prop_assert!((w - expect).abs() <= 1e-12 * expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mollified_kernel_is_odd_and_equivariant(
        z in phase(), th in 0.0..(2.0 * PI), e in prop_oneof![Just(0.1), Just(0.4)]
    ) {
        let spec = MollifierSpec::new(e).unwrap();
        let z = z * (e / 2.0);
        let a = spec.j_eps_tabulated(z);
        prop_assert!((a + spec.j_eps_tabulated(z * -1.0)).norm() <= 1e-12 * a.norm().max(1e-12));
        let zr = PhasePoint { x: rotate(z.x, th), v: rotate(z.v, th) };
        let b = spec.j_eps_tabulated(zr);
        prop_assert!((rotate(a, th) - b).norm() <= 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn mollified_kernel_bounded(z in phase(), e in prop_oneof![Just(0.05), Just(0.2)]) {
        let spec = MollifierSpec::new(e).unwrap();
        let z = z * e;
        prop_assert!(spec.j_eps_tabulated(z).norm() <= spec.kernel_sup_bound());
    }
}

#[test]
fn kappa_closed_form_against_gauss_legendre() {
    // ∫ r (1+r)^{-γ} dr with r = u/(1-u) on [0, 1]
    let gl = GaussLegendre::new(200);
    for g in [3.0, 4.0, 6.0] {
        let v = gl.integrate(0.0, 1.0, |u| u * (1.0f64 - u).powf(g - 3.0));
        assert!((2.0 * PI * v - kappa(g).unwrap()).abs() < 1e-10, "gamma {g}");
    }
}

#[test]
fn chi_eps_has_unit_mass() {
    // product of two planar bumps, integrated in polar coordinates per plane
    for e in [0.4, 0.1] {
        let spec = MollifierSpec::new(e).unwrap();
        let (radial, _) = integrate_adaptive(
            |r| 2.0 * PI * r * spec.chi_eps(PhasePoint::new(r, 0.0, 0.0, 0.0)),
            0.0,
            e,
            1e-14,
            1e-12,
        );
        let at_origin = spec.chi_eps(PhasePoint::ORIGIN);
        // chi_eps(x, 0) = chi_ε(x) chi_ε(0), so the planar mass is radial / chi_ε(0)
        let planar_origin = at_origin.sqrt();
        let mass = (radial / planar_origin).powi(2);
        assert!((mass - 1.0).abs() < 1e-8, "eps {e}: {mass}");
    }
}

#[test]
fn ring_mass_grows_with_radius() {
    let spec = MollifierSpec::new(0.2).unwrap();
    for s in [0.0, 0.1, 0.3] {
        let mut prev = 0.0;
        for k in 1..=40 {
            let r = 0.02 * k as f64;
            let m = spec.ring_mass(s, r);
            assert!(m >= prev - 1e-12, "s {s} r {r}");
            prev = m;
        }
        assert!((prev - 1.0).abs() < 1e-9);
    }
}

#[test]
fn far_from_singularity_matches_exact_kernel() {
    let spec = MollifierSpec::new(0.05).unwrap();
    let z = PhasePoint::new(1.0, 0.0, 0.0, 0.0);
    let j = spec.j_eps(z);
    assert!((j - Vec2(0.0, -1.0 / (2.0 * PI))).norm() < 1e-3);
}
