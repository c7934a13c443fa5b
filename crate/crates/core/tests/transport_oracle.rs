use gyrokin::fields::FieldKernel;
use gyrokin::flow::{integrate, FlowConfig};
use gyrokin::measures::{InitialCondition, ParticleEnsemble};
use gyrokin::transport::{
    cauchy_envelope, compose_transport, stability_envelope, transport_cost_q, w1_exact, CauchyConstants,
    Coupling, StabilityVariant,
};
use gyrokin::verify::brute_force_w1;
use gyrokin::PhasePoint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(r: &mut ChaCha8Rng, n: usize) -> ParticleEnsemble {
    ParticleEnsemble::uniform(
        (0..n)
            .map(|_| PhasePoint::from_array(std::array::from_fn(|_| r.gen_range(-1.0..=1.0))))
            .collect(),
    )
    .unwrap()
}

#[test]
fn two_diracs_at_unit_distance() {
    let a = ParticleEnsemble::uniform(vec![PhasePoint::ORIGIN]).unwrap();
    let b = ParticleEnsemble::uniform(vec![PhasePoint::new(1.0, 0.0, 0.0, 0.0)]).unwrap();
    assert_eq!(w1_exact(&a, &b).unwrap().0, 1.0);
}

#[test]
fn identical_clouds_pair_identically() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let a = cloud(&mut r, 40);
    let (w, c) = w1_exact(&a, &a).unwrap();
    assert_eq!(w, 0.0);
    assert_eq!(c.pairing, (0..40).collect::<Vec<_>>());
}

#[test]
fn five_point_clouds_match_all_permutations() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let a = cloud(&mut r, 5);
        let b = cloud(&mut r, 5);
        let w = w1_exact(&a, &b).unwrap().0;
        assert!((w - brute_force_w1(a.points(), b.points())).abs() <= 1e-9);
    }
}

#[test]
fn metric_axioms_on_random_triples() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (a, b, c) = (cloud(&mut r, 12), cloud(&mut r, 12), cloud(&mut r, 12));
        let ab = w1_exact(&a, &b).unwrap().0;
        let ba = w1_exact(&b, &a).unwrap().0;
        let bc = w1_exact(&b, &c).unwrap().0;
        let ac = w1_exact(&a, &c).unwrap().0;
        assert!((ab - ba).abs() <= 1e-12);
        assert!(ac <= ab + bc + 1e-12);
    }
}

#[test]
fn coupling_marginals_validate() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let (a, b) = (cloud(&mut r, 20), cloud(&mut r, 20));
    let (w, c) = w1_exact(&a, &b).unwrap();
    c.validate(&a, &b).unwrap();
    assert!((c.cost(a.points(), b.points()) - w).abs() < 1e-15);
    let bad = Coupling {
        pairing: vec![0; 20],
        weights: a.weights().to_vec(),
    };
    assert!(bad.validate(&a, &b).is_err());
}

#[test]
fn size_mismatch_is_an_error() {
    let mut r = ChaCha8Rng::seed_from_u64(9);
    assert!(w1_exact(&cloud(&mut r, 3), &cloud(&mut r, 4)).is_err());
}

#[test]
fn transported_coupling_bounds_w1_along_flows() {
    let ic = InitialCondition::default_two_bump();
    let mut r = ChaCha8Rng::seed_from_u64(21);
    let f0 = ic.sample(40, &mut r).unwrap();
    let g0 = ic.sample(40, &mut r).unwrap();
    let cfg = FlowConfig::new(0.02, 0.4);
    let tf = integrate(&f0, FieldKernel::mollified(0.2).unwrap(), &cfg).unwrap();
    let tg = integrate(&g0, FieldKernel::mollified(0.2).unwrap(), &cfg).unwrap();
    let (w0, t0) = w1_exact(&f0, &g0).unwrap();
    let (c0, q0) = compose_transport(&t0, &tf, &tg, 0.0).unwrap();
    assert_eq!(c0, t0);
    assert!((q0 - w0).abs() < 1e-15);
    let q = transport_cost_q(&t0, &tf, &tg).unwrap();
    for (k, &t) in q.times.iter().enumerate() {
        let w = w1_exact(&tf.ensemble_at_step(k), &tg.ensemble_at_step(k)).unwrap().0;
        assert!(w <= q.plain[k] * (1.0 + 1e-12), "t = {t}");
        assert!(q.plain[k] <= q.running_sup[k]);
    }
    assert!(compose_transport(&t0, &tf, &tg, 1.0).is_err());
}

#[test]
fn identical_solutions_have_zero_q() {
    let ic = InitialCondition::default_two_bump();
    let f0 = ic.sample(20, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let cfg = FlowConfig::new(0.05, 0.2);
    let tf = integrate(&f0, FieldKernel::mollified(0.2).unwrap(), &cfg).unwrap();
    let q = transport_cost_q(&Coupling::identity(f0.weights()), &tf, &tf).unwrap();
    assert!(q.plain.iter().chain(&q.running_sup).all(|v| *v == 0.0));
}

#[test]
fn single_particles_drift_apart_at_constant_cost() {
    // one particle per measure: no self-field, so both stay put
    let a = ParticleEnsemble::uniform(vec![PhasePoint::new(0.2, 0.0, 0.1, 0.0)]).unwrap();
    let b = a.translated(PhasePoint::new(0.0, 0.3, 0.0, 0.4));
    let cfg = FlowConfig::new(0.1, 1.0);
    let ta = integrate(&a, FieldKernel::mollified(0.1).unwrap(), &cfg).unwrap();
    let tb = integrate(&b, FieldKernel::mollified(0.1).unwrap(), &cfg).unwrap();
    let t0 = w1_exact(&a, &b).unwrap().1;
    let q = transport_cost_q(&t0, &ta, &tb).unwrap();
    assert!(q.plain.iter().all(|v| (v - 0.5).abs() < 1e-15));
}

#[test]
fn stability_envelope_examples() {
    assert_eq!(stability_envelope(0.3, 3.0, 0.0, StabilityVariant::SixSqrt2).unwrap(), 0.3);
    assert_eq!(stability_envelope(0.0, 3.0, 5.0, StabilityVariant::Six).unwrap(), 0.0);
    let f = stability_envelope(1.0, 3.0, 0.1, StabilityVariant::SixSqrt2).unwrap();
    assert!((f - 14.378).abs() < 1e-3, "{f}");
    assert!(stability_envelope(1.0, 2.0, 0.1, StabilityVariant::Six).is_err());
}

#[test]
fn cauchy_constants_example() {
    let c = CauchyConstants::new(3.0, 1.0, 1.0).unwrap();
    assert!((c.c_gamma - 7579.86).abs() < 0.01, "{}", c.c_gamma);
    assert!((c.alpha - 0.447_292_18).abs() < 1e-8);
    assert!((c.c_prime - 2824.35).abs() < 0.01, "{}", c.c_prime);
    // e^{C'} overflows; the log form stays finite
    assert!(cauchy_envelope(0.1, 0.05, 3.0, 1.0, 1.0, 0.0).unwrap().is_infinite());
    assert!((c.ln_envelope(0.1, 0.05, 3.0, 0.0) - (0.15f64.ln() + c.c_prime)).abs() < 1e-9);
    assert!(c.ln_envelope(0.1, 0.05, 3.0, 1.0) > c.ln_envelope(0.1, 0.05, 3.0, 0.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_matches_brute_force(seed in any::<u64>(), n in 2usize..=6) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = cloud(&mut r, n);
        let b = cloud(&mut r, n);
        let w = w1_exact(&a, &b).unwrap().0;
        prop_assert!((w - brute_force_w1(a.points(), b.points())).abs() <= 1e-9);
    }

    #[test]
    fn translation_costs_its_length(seed in any::<u64>(), h in 0.0..2.0f64) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = cloud(&mut r, 8);
        let b = a.translated(PhasePoint::new(0.0, h, 0.0, 0.0));
        let w = w1_exact(&a, &b).unwrap().0;
        prop_assert!((w - h).abs() <= 1e-12);
    }
}
