use std::f64::consts::PI;

use gyrokin::fields::{divergence_fd, eval_field, field_sup_bound, self_fields, FieldKernel, Source};
use gyrokin::flow::{
    integrate, read_trace, reverse_flow, semilag_density, write_trace, FlowConfig, SemilagOptions,
};
use gyrokin::measures::{lp_norm, GridDensity, GridSpec, InitialCondition, ParticleEnsemble};
use gyrokin::quadrature::GaussLegendre;
use gyrokin::{Error, PhasePoint, Vec2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_bump(n: usize, seed: u64) -> ParticleEnsemble {
    InitialCondition::default_two_bump()
        .sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap()
}

/// Polar Gauss-Legendre atoms for the uniform density on a unit disc.
fn disc_atoms(order: usize) -> Vec<(Vec2, f64)> {
    let gl = GaussLegendre::new(order);
    let mut out = Vec::new();
    for (r, wr) in gl.mapped(0.0, 1.0) {
        for k in 0..2 * order {
            let th = (k as f64 + 0.5) * PI / order as f64;
            out.push((Vec2(r * th.cos(), r * th.sin()), wr * r * (PI / order as f64) / PI));
        }
    }
    out
}

#[test]
fn uniform_ball_product_field_outside() {
    let atoms = disc_atoms(24);
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for &(x, wx) in &atoms {
        for &(v, wv) in &atoms {
            pts.push(PhasePoint { x, v });
            wts.push(wx * wv);
        }
    }
    let total: f64 = wts.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    let f = ParticleEnsemble::new(pts, wts.iter().map(|w| w / total).collect()).unwrap();
    let z = PhasePoint::new(2.0, 0.0, 0.0, 0.0);
    let ev = eval_field(Source::Ensemble(&f), z, &FieldKernel::Exact).unwrap();
    // outside the x-disc every source point is active: the disc acts as a point mass
    assert!((ev.u - Vec2(0.0, -1.0 / (4.0 * PI))).norm() < 1e-4, "{:?}", ev.u);
    assert!(ev.a.norm() < 1e-12);
}

#[test]
fn symmetric_grid_has_no_field_at_origin() {
    let ic = InitialCondition::default_two_bump();
    // unequal x and v spacings keep cell centres off the cone |x| = |v|
    let spec = GridSpec::new([2.0, 2.0, 2.3, 2.3], [7, 7, 9, 9]).unwrap();
    let grid = GridDensity::from_fn(&spec, |z| ic.density(z));
    for k in [FieldKernel::Exact, FieldKernel::mollified(0.2).unwrap()] {
        let ev = eval_field(Source::Grid(&grid), PhasePoint::ORIGIN, &k).unwrap();
        assert!(ev.u.norm() < 1e-12 && ev.a.norm() < 1e-12, "{:?}", ev);
    }
}

#[test]
fn mollified_fields_are_divergence_free() {
    let f = two_bump(200, 4);
    let k = FieldKernel::mollified(0.2).unwrap();
    let probes = [
        PhasePoint::new(0.3, 0.2, -0.1, 0.4),
        PhasePoint::new(1.2, -0.5, 0.6, 0.1),
        PhasePoint::new(-0.8, 0.1, -0.4, -0.3),
    ];
    for z in probes {
        let div = divergence_fd(Source::Ensemble(&f), z, &k, 1e-4).unwrap();
        assert!(div.abs() < 1e-5, "{z:?}: {div}");
    }
}

#[test]
fn fields_swap_roles_under_phase_swap() {
    let f = two_bump(50, 9);
    let swapped = ParticleEnsemble::new(f.points().iter().map(|p| p.swap()).collect(), f.weights().to_vec()).unwrap();
    let z = PhasePoint::new(0.4, -0.3, 0.2, 0.5);
    let k = FieldKernel::mollified(0.1).unwrap();
    let a = eval_field(Source::Ensemble(&f), z, &k).unwrap();
    let b = eval_field(Source::Ensemble(&swapped), z.swap(), &k).unwrap();
    assert!((a.u - b.a).norm() < 1e-14 && (a.a - b.u).norm() < 1e-14);
}

#[test]
fn two_particle_initial_velocity() {
    let f = ParticleEnsemble::uniform(vec![
        PhasePoint::new(1.0, 0.0, 0.0, 0.0),
        PhasePoint::new(-1.0, 0.0, 0.0, 0.0),
    ])
    .unwrap();
    let v = self_fields(&f, &FieldKernel::mollified(0.01).unwrap()).unwrap();
    assert!((v[0].x - Vec2(0.0, -1.0 / (8.0 * PI))).norm() < 1e-3);
    assert!((v[0] + v[1]).norm() < 1e-15);
}

#[test]
fn exact_kernel_on_coincident_particles_is_near_singular() {
    let p = PhasePoint::new(0.5, 0.0, 0.1, 0.0);
    let f = ParticleEnsemble::uniform(vec![p, p]).unwrap();
    let mut cfg = FlowConfig::new(0.1, 0.2);
    cfg.allow_unmollified = true;
    assert!(matches!(integrate(&f, FieldKernel::Exact, &cfg), Err(Error::NearSingular(_))));
}

#[test]
fn step_guard_trips() {
    let f = two_bump(20, 1);
    let mut cfg = FlowConfig::new(0.1, 0.2);
    cfg.max_step_displacement = 1e-9;
    assert!(matches!(
        integrate(&f, FieldKernel::mollified(0.1).unwrap(), &cfg),
        Err(Error::StepGuard { .. })
    ));
}

#[test]
fn displacement_within_field_bound() {
    let ic = InitialCondition::default_two_bump();
    let grid = GridDensity::from_fn(&GridSpec::cube(3.0, 13).unwrap(), |z| ic.density(z));
    let bound = field_sup_bound(1.0, lp_norm(&grid, f64::INFINITY).unwrap());
    let f = two_bump(200, 2);
    for e in [0.4, 0.1] {
        let tr = integrate(&f, FieldKernel::mollified(e).unwrap(), &FlowConfig::new(0.05, 1.0)).unwrap();
        for k in [5, 10, 20] {
            let t = tr.time(k);
            let disp = tr
                .positions_at_step(k)
                .iter()
                .zip(f.points())
                .map(|(a, b)| (*a - *b).norm())
                .fold(0.0, f64::max);
            assert!(disp <= 2.0 * bound * t, "eps {e} t {t}: {disp}");
        }
    }
}

#[test]
fn rk4_is_fourth_order() {
    // slow dynamics: long horizon and coarse steps keep the error above table noise
    let f = two_bump(50, 12);
    let run = |dt: f64| {
        integrate(&f, FieldKernel::mollified(0.2).unwrap(), &FlowConfig::new(dt, 4.0))
            .unwrap()
            .ensemble_at(4.0)
            .unwrap()
    };
    let reference = run(0.1);
    let err = |g: &ParticleEnsemble| {
        g.points()
            .iter()
            .zip(reference.points())
            .map(|(a, b)| (*a - *b).norm())
            .fold(0.0, f64::max)
    };
    let coarse = err(&run(0.8));
    let fine = err(&run(0.4));
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn reverse_flow_round_trips() {
    let f = two_bump(100, 3);
    let tr = integrate(&f, FieldKernel::mollified(0.1).unwrap(), &FlowConfig::new(0.01, 0.5)).unwrap();
    let qs = vec![PhasePoint::new(0.9, 0.1, 0.4, 0.0), PhasePoint::new(-1.1, 0.2, -0.6, 0.1)];
    let mut rq = reverse_flow(&tr, 0.5, &qs, Some(0.01)).unwrap();
    let res = rq.check_residuals(&tr, Some(0.01)).unwrap();
    assert!(res.iter().all(|r| *r < 1e-9), "{res:?}");
    assert!(tr.positions_at(0.7).is_err());
}

#[test]
fn particles_follow_their_own_tracers() {
    let f = two_bump(60, 6);
    let tr = integrate(&f, FieldKernel::mollified(0.2).unwrap(), &FlowConfig::new(0.02, 0.4)).unwrap();
    let moved = tr.push_forward(&f.points()[..5], 0.4, 0.02).unwrap();
    for (a, b) in moved.iter().zip(tr.positions_at_step(tr.steps())) {
        assert!((*a - *b).norm() < 1e-7);
    }
}

#[test]
fn integration_is_repeatable_and_traces_round_trip() {
    let f = two_bump(40, 8);
    let cfg = FlowConfig::new(0.05, 0.3);
    let a = integrate(&f, FieldKernel::mollified(0.1).unwrap(), &cfg).unwrap();
    let b = integrate(&f, FieldKernel::mollified(0.1).unwrap(), &cfg).unwrap();
    for k in 0..=a.steps() {
        assert_eq!(a.positions_at_step(k), b.positions_at_step(k));
    }
    let mut buf = Vec::new();
    write_trace(&mut buf, &a, 2, 99, "abc").unwrap();
    let file = read_trace(&mut buf.as_slice()).unwrap();
    assert_eq!(file.header.seed, 99);
    assert_eq!(file.snapshots.len(), 4);
    let last = file.at(0.3).unwrap();
    assert_eq!(last.ensemble.points(), a.positions_at_step(a.steps()));
}

#[test]
fn semilagrangian_density_keeps_mass() {
    let ic = InitialCondition::default_two_bump();
    let f = ic.sample(200, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let tr = integrate(&f, FieldKernel::mollified(0.1).unwrap(), &FlowConfig::new(0.05, 0.5)).unwrap();
    let grid = GridSpec::new([3.75, 2.75, 3.25, 2.75], [15, 11, 13, 11]).unwrap();
    let (d0, _) = semilag_density(&ic, &tr, 0.0, &grid, &SemilagOptions::default()).unwrap();
    let (d1, stats) = semilag_density(&ic, &tr, 0.5, &grid, &SemilagOptions::default()).unwrap();
    assert!((d1.mass() - d0.mass()).abs() < 1e-3, "{} vs {}", d1.mass(), d0.mass());
    assert!(stats.cells_skipped > 0 && stats.exits == 0);
    assert!(stats.max_displacement <= stats.skip_radius);
}
