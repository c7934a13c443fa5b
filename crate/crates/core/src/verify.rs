//! Property checks with sampled oracles, shared by the `verify` command and the
//! acceptance tests.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fields::{eval_fields, field_lip_bound, field_sup_bound, FieldKernel, Source};
use crate::kernel::{increment_identity, j_variation_bound, transport, PhasePoint, Vec2};
use crate::measures::{kappa, lp_norm, GridDensity, GridSpec, InitialCondition, InitialKind, ParticleEnsemble, TruncatedGaussian};
use crate::mollify::{mollify_ensemble, MollifierSpec};
use crate::quadrature::integrate_adaptive;
use crate::transport::w1_exact;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity, in the units of `limit`.
    pub worst: f64,
    pub limit: f64,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: worst {:.3e}, limit {:.3e}; {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.limit,
            self.detail,
            self.seconds
        )
    }
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }

    fn finish(self, name: &str, passed: bool, worst: f64, limit: f64, detail: String) -> CheckOutcome {
        CheckOutcome {
            name: name.to_string(),
            passed,
            worst,
            limit,
            detail,
            seconds: self.0.elapsed().as_secs_f64(),
        }
    }
}

/// Sample sizes for the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub identity_pairs: usize,
    pub variation_pairs: usize,
    pub field_probes: usize,
    pub lipschitz_pairs: usize,
    pub kernel_samples: usize,
    pub w1_instances: usize,
    pub jitters: usize,
}

impl Budget {
    pub fn full() -> Self {
        Self {
            identity_pairs: 100_000,
            variation_pairs: 100_000,
            field_probes: 10_000,
            lipschitz_pairs: 10_000,
            kernel_samples: 10_000,
            w1_instances: 200,
            jitters: 10_000,
        }
    }

    pub fn quick() -> Self {
        Self {
            identity_pairs: 10_000,
            variation_pairs: 10_000,
            field_probes: 300,
            lipschitz_pairs: 300,
            kernel_samples: 2_000,
            w1_instances: 20,
            jitters: 2_000,
        }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn planar<R: Rng>(rng: &mut R, half: f64, min_norm: f64) -> Vec2 {
    loop {
        let p = Vec2(rng.gen_range(-half..=half), rng.gen_range(-half..=half));
        if p.norm() > min_norm {
            return p;
        }
    }
}

fn disc<R: Rng>(rng: &mut R, radius: f64) -> Vec2 {
    let r = radius * rng.gen::<f64>().sqrt();
    let th = 2.0 * PI * rng.gen::<f64>();
    Vec2(r * th.cos(), r * th.sin())
}

fn unit4<R: Rng>(rng: &mut R) -> PhasePoint {
    loop {
        let p = PhasePoint::from_array(std::array::from_fn(|_| rng.gen_range(-1.0..=1.0)));
        let n = p.norm();
        if n > 1e-3 && n <= 1.0 {
            return p * (1.0 / n);
        }
    }
}

/// Increment identity `|x^⊥/|x|² - y^⊥/|y|²| = |x - y|/(|x||y|)` and its AM-GM relaxation.
pub fn check_increment_identity(pairs: usize, seed: u64) -> CheckOutcome {
    let timer = Timer::start();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut relax_fail = 0usize;
    for _ in 0..pairs {
        let x = planar(&mut r, 3.0, 1e-3);
        let y = planar(&mut r, 3.0, 1e-3);
        let id = increment_identity(x, y).expect("nonzero inputs");
        worst = worst.max((id.lhs - id.rhs).abs() / id.rhs);
        if id.relaxed < id.rhs * (1.0 - 1e-14) {
            relax_fail += 1;
        }
    }
    let limit = 1e-12;
    timer.finish(
        "increment identity",
        worst <= limit && relax_fail == 0,
        worst,
        limit,
        format!("{pairs} pairs, {relax_fail} relaxation failures"),
    )
}

/// `|J(z) - J(z*)| <= j_variation_bound(z, z*)` on random phase pairs.
pub fn check_variation_bound(pairs: usize, seed: u64) -> CheckOutcome {
    let timer = Timer::start();
    let mut r = rng(seed);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let point = |r: &mut ChaCha8Rng| PhasePoint {
        x: planar(r, 3.0, 1e-3),
        v: planar(r, 3.0, 1e-3),
    };
    for _ in 0..pairs {
        let z = point(&mut r);
        let zs = point(&mut r);
        let diff = (transport(z).expect("regular") - transport(zs).expect("regular")).norm();
        let bound = j_variation_bound(z, zs).expect("nonzero components");
        if diff > 0.0 {
            worst = worst.max(diff / bound);
        }
        if diff > bound * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    timer.finish(
        "variation bound",
        violations == 0,
        worst,
        1.0,
        format!("{pairs} pairs, {violations} violations (worst is difference / bound)"),
    )
}

/// `κ_γ` by nested adaptive quadrature in polar coordinates, with `r = e^s - 1`.
pub fn kappa_by_quadrature(gamma: f64) -> f64 {
    let radial = |s: f64| (s.exp() - 1.0) * ((1.0 - gamma) * s).exp();
    let s_max = 80.0 / (gamma - 2.0).min(1.0);
    let (inner, _) = integrate_adaptive(radial, 0.0, s_max, 1e-14, 1e-13);
    let (outer, _) = integrate_adaptive(|_| inner, 0.0, 2.0 * PI, 1e-14, 1e-13);
    outer
}

pub fn check_kappa(gammas: &[f64]) -> CheckOutcome {
    let timer = Timer::start();
    let mut worst = 0.0f64;
    for &g in gammas {
        let exact = kappa(g).expect("gamma > 2");
        worst = worst.max((kappa_by_quadrature(g) - exact).abs());
    }
    let limit = 1e-8;
    timer.finish(
        "kappa closed form",
        worst <= limit,
        worst,
        limit,
        format!("gamma in {gammas:?}"),
    )
}

/// A catalog density discretised as a piecewise-constant grid density.
pub struct CatalogEntry {
    pub name: &'static str,
    pub initial: InitialCondition,
    pub grid: GridDensity,
}

/// Test densities on grids of a few thousand cells.
pub fn catalog() -> Vec<CatalogEntry> {
    let gauss = TruncatedGaussian {
        center: PhasePoint::ORIGIN,
        sigma_x: 0.5,
        sigma_v: 0.5,
        truncation: 4.0,
    };
    let entries: Vec<(&'static str, InitialKind, GridSpec)> = vec![
        ("gaussian", InitialKind::Gaussian(gauss), GridSpec::cube(2.0, 8).expect("valid grid")),
        (
            "two_bump",
            InitialCondition::default_two_bump().kind,
            GridSpec::new([2.4, 1.8, 2.1, 1.8], [8, 6, 7, 6]).expect("valid grid"),
        ),
        (
            "polynomial",
            InitialKind::Polynomial { exponent: 4.0 },
            GridSpec::cube(2.0, 8).expect("valid grid"),
        ),
        (
            "uniform",
            InitialKind::Uniform { half_width: 1.0 },
            GridSpec::cube(1.0, 6).expect("valid grid"),
        ),
    ];
    entries
        .into_iter()
        .map(|(name, kind, spec)| {
            let initial = InitialCondition::new(kind).expect("valid catalog density");
            let grid = GridDensity::from_fn(&spec, |z| initial.density(z));
            CatalogEntry { name, initial, grid }
        })
        .collect()
}

/// Exact `‖·‖_γ` of a piecewise-constant grid density: the weight is maximised
/// over each cell, at the corner farthest from the origin in each plane.
pub fn cellwise_gamma_norm(grid: &GridDensity, gamma: f64) -> f64 {
    let h = grid.spec().step();
    let far = |c: f64, h: f64| c.abs() + 0.5 * h;
    grid.iter_cells()
        .map(|(c, f)| {
            let rx = far(c.x.0, h[0]).hypot(far(c.x.1, h[1]));
            let rv = far(c.v.0, h[2]).hypot(far(c.v.1, h[3]));
            ((1.0 + rx) * (1.0 + rv)).powf(gamma) * f.abs()
        })
        .fold(0.0, f64::max)
}

/// Probe points: half drawn near the density, half uniform in an enlarged box.
fn probes<R: Rng>(entry: &CatalogEntry, n: usize, r: &mut R) -> Vec<PhasePoint> {
    let hw = entry.grid.spec().half_width();
    (0..n)
        .map(|k| {
            if k % 2 == 0 {
                entry.initial.sample_point(r)
            } else {
                PhasePoint::from_array(std::array::from_fn(|a| 1.25 * hw[a] * r.gen_range(-1.0..=1.0)))
            }
        })
        .collect()
}

fn field_kernel(eps: f64) -> Result<FieldKernel> {
    if eps == 0.0 {
        Ok(FieldKernel::Exact)
    } else {
        FieldKernel::mollified(eps)
    }
}

/// Sampled `sup |U|, |A| <= c ‖f‖∞^{1/4} ‖f‖₁^{3/4}` on the catalog.
pub fn check_field_sup(probe_count: usize, epsilons: &[f64], seed: u64) -> Result<CheckOutcome> {
    let timer = Timer::start();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    let mut worst_at = String::new();
    for entry in catalog() {
        let zs = probes(&entry, probe_count, &mut r);
        let linf = lp_norm(&entry.grid, f64::INFINITY)?;
        let bound = field_sup_bound(entry.grid.mass(), linf);
        for &e in epsilons {
            let kernel = field_kernel(e)?;
            let fields = eval_fields(Source::Grid(&entry.grid), &zs, &kernel)?;
            let sup = fields.iter().map(|f| f.u.norm().max(f.a.norm())).fold(0.0, f64::max);
            if sup > bound * (1.0 + 1e-6) {
                violations += 1;
            }
            if sup / bound > worst {
                worst = sup / bound;
                worst_at = format!("{} eps={e}", entry.name);
            }
        }
    }
    Ok(timer.finish(
        "field sup bound",
        violations == 0,
        worst,
        1.0 + 1e-6,
        format!("{probe_count} probes per case, {violations} violations, worst ratio at {worst_at}"),
    ))
}

/// Sampled Lipschitz quotients of the exact fields against `3 κ_γ ‖f‖_γ`, in the
/// distance `|x - x*| + |v - v*|`. Separations range from one cell width to 2.
pub fn check_field_lipschitz(pairs: usize, gammas: &[f64], seed: u64) -> Result<CheckOutcome> {
    let timer = Timer::start();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    let mut worst_at = String::new();
    for entry in catalog() {
        let h = entry.grid.spec().step().iter().copied().fold(f64::INFINITY, f64::min);
        let base = probes(&entry, pairs, &mut r);
        let other: Vec<PhasePoint> = base
            .iter()
            .map(|&z| {
                let sep = h * (2.0 / h).powf(r.gen::<f64>());
                z + unit4(&mut r) * sep
            })
            .collect();
        let src = Source::Grid(&entry.grid);
        let fa = eval_fields(src, &base, &FieldKernel::Exact)?;
        let fb = eval_fields(src, &other, &FieldKernel::Exact)?;
        let quotient = fa
            .iter()
            .zip(&fb)
            .map(|(a, b)| {
                let d = (a.z.x - b.z.x).norm() + (a.z.v - b.z.v).norm();
                (a.u - b.u).norm().max((a.a - b.a).norm()) / d
            })
            .fold(0.0, f64::max);
        for &g in gammas {
            let bound = field_lip_bound(cellwise_gamma_norm(&entry.grid, g), g)?;
            if quotient > bound {
                violations += 1;
            }
            if quotient / bound > worst {
                worst = quotient / bound;
                worst_at = format!("{} gamma={g}", entry.name);
            }
        }
    }
    Ok(timer.finish(
        "field Lipschitz bound",
        violations == 0,
        worst,
        1.0,
        format!("{pairs} pairs per density, {violations} violations, worst ratio at {worst_at}"),
    ))
}

/// Sampled `|J_ε| <= π‖χ‖∞/ε` and finite-difference quotients `<= π‖∇χ‖∞/ε²`.
pub fn check_mollified_kernel(samples: usize, epsilons: &[f64], seed: u64) -> Result<CheckOutcome> {
    let timer = Timer::start();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    for &e in epsilons {
        let spec = MollifierSpec::new(e)?;
        let (sup_b, lip_b) = (spec.kernel_sup_bound(), spec.kernel_lip_bound());
        for _ in 0..samples {
            let z = PhasePoint {
                x: disc(&mut r, 4.0 * e),
                v: disc(&mut r, 4.0 * e),
            };
            let j = spec.j_eps_tabulated(z);
            let dz = unit4(&mut r) * (1e-3 * e);
            let q = (spec.j_eps_tabulated(z + dz) - j).norm() / dz.norm();
            let ratio = (j.norm() / sup_b).max(q / lip_b);
            worst = worst.max(ratio);
            if ratio > 1.0 {
                violations += 1;
            }
        }
    }
    Ok(timer.finish(
        "mollified kernel bounds",
        violations == 0,
        worst,
        1.0,
        format!("{samples} samples per eps in {epsilons:?}, {violations} violations"),
    ))
}

/// Minimum of `Σ |a_i - b_σ(i)| / n` over all permutations (Heap's algorithm).
pub fn brute_force_w1(a: &[PhasePoint], b: &[PhasePoint]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).sum::<f64>();
    let mut best = cost(&perm);
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best / n as f64
}

pub fn check_w1_exact(instances: usize, seed: u64) -> Result<CheckOutcome> {
    let timer = Timer::start();
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for n in 2..=7 {
        for _ in 0..instances {
            let mut cloud = || -> Vec<PhasePoint> {
                (0..n)
                    .map(|_| PhasePoint::from_array(std::array::from_fn(|_| r.gen_range(-1.0..=1.0))))
                    .collect()
            };
            let a = cloud();
            let b = cloud();
            let (w, _) = w1_exact(
                &ParticleEnsemble::uniform(a.clone())?,
                &ParticleEnsemble::uniform(b.clone())?,
            )?;
            worst = worst.max((w - brute_force_w1(&a, &b)).abs());
        }
    }
    let limit = 1e-9;
    Ok(timer.finish(
        "W1 exactness",
        worst <= limit,
        worst,
        limit,
        format!("n = 2..7, {instances} instances each"),
    ))
}

/// Jitter displacements `<= 2√2 ε` per sample, mean within `[0, 2ε]`, and
/// `W1 <= ` identity cost.
pub fn check_mollification_distance(jitters: usize, epsilons: &[f64], seed: u64) -> Result<CheckOutcome> {
    let timer = Timer::start();
    let mut r = rng(seed);
    let f = InitialCondition::default_two_bump().sample(100, &mut r)?;
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    let mut means = Vec::new();
    for &e in epsilons {
        let spec = MollifierSpec::new(e)?;
        let rounds = jitters.div_ceil(f.len());
        let mut total = 0.0;
        let mut count = 0usize;
        for round in 0..rounds {
            let (g, cost) = mollify_ensemble(&f, &spec, &mut r)?;
            for (a, b) in f.points().iter().zip(g.points()) {
                let d = (*a - *b).norm();
                worst = worst.max(d / (2.0 * std::f64::consts::SQRT_2 * e));
                total += d;
                count += 1;
            }
            if round < 5 {
                let (w, _) = w1_exact(&f, &g)?;
                if w > cost * (1.0 + 1e-12) {
                    failures += 1;
                }
            }
        }
        let mean = total / count as f64;
        if !(0.0..=2.0 * e).contains(&mean) {
            failures += 1;
        }
        means.push(mean / e);
    }
    let passed = failures == 0 && worst <= 1.0;
    Ok(timer.finish(
        "mollification distance",
        passed,
        worst,
        1.0,
        format!("{jitters} jitters per eps in {epsilons:?}, mean / eps = {means:.3?}, {failures} failures"),
    ))
}

/// Every check at the given budget, in order.
pub fn run_suite(budget: Budget, seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_increment_identity(budget.identity_pairs, seed),
        check_variation_bound(budget.variation_pairs, seed + 1),
        check_kappa(&[2.5, 3.0, 4.0, 6.0]),
        check_field_sup(budget.field_probes, &[0.4, 0.2, 0.1, 0.05, 0.0], seed + 3)?,
        check_field_lipschitz(budget.lipschitz_pairs, &[2.5, 3.0, 4.0], seed + 4)?,
        check_mollified_kernel(budget.kernel_samples, &[0.4, 0.1], seed + 5)?,
        check_w1_exact(budget.w1_instances, seed + 6)?,
        check_mollification_distance(budget.jitters, &[0.4, 0.1, 0.025], seed + 7)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_matches_hand_case() {
        let a = [PhasePoint::new(0.0, 0.0, 0.0, 0.0), PhasePoint::new(1.0, 0.0, 0.0, 0.0)];
        let b = [PhasePoint::new(1.0, 0.0, 0.0, 0.0), PhasePoint::new(0.0, 0.0, 0.0, 0.0)];
        assert_eq!(brute_force_w1(&a, &b), 0.0);
    }

    #[test]
    fn kappa_quadrature_close() {
        assert!((kappa_by_quadrature(3.0) - PI).abs() < 1e-9);
    }

    #[test]
    fn cellwise_norm_dominates_centres() {
        let e = &catalog()[0];
        let centre = crate::measures::gamma_norm(&e.grid, 3.0).unwrap();
        assert!(cellwise_gamma_norm(&e.grid, 3.0) > centre);
    }
}
