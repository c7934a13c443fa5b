//! Compactly supported bump mollifier and the mollified kernel.

mod tables;

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::kernel::{PhasePoint, Vec2};
use crate::measures::ParticleEnsemble;
use crate::quadrature::{golden_max, integrate_adaptive, GaussLegendre};

pub use tables::{RingMassTable, ScreeningTable};

/// Resolution of both kernel tables along each axis.
pub const TABLE_RESOLUTION: usize = 512;

/// Radial bump `C exp(-k / (1 - |y|²))` supported in the unit disc of R².
#[derive(Clone, Debug)]
pub struct BumpProfile {
    sharpness: f64,
    norm: f64,
    sup: f64,
    grad_sup: f64,
}

impl BumpProfile {
    /// Builds and normalises the profile; `sharpness` is `k` above, 1 for the standard bump.
    pub fn new(sharpness: f64) -> Result<Self> {
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return domain(format!("bump sharpness must be positive, got {sharpness}"));
        }
        let raw = |r: f64| if r < 1.0 { (-sharpness / (1.0 - r * r)).exp() } else { 0.0 };
        let (mass, _) = integrate_adaptive(|r| 2.0 * PI * r * raw(r), 0.0, 1.0, 1e-16, 1e-14);
        let norm = 1.0 / mass;
        let check = GaussLegendre::new(160).integrate(0.0, 1.0, |r| 2.0 * PI * r * norm * raw(r));
        if (check - 1.0).abs() > 1e-10 {
            return Err(Error::Numerics(format!(
                "bump normalisation drifted: ∫χ = {check}"
            )));
        }
        let mut p = BumpProfile {
            sharpness,
            norm,
            sup: norm * (-sharpness).exp(),
            grad_sup: 0.0,
        };
        let (_, g) = golden_max(|r| p.radial_derivative(r).abs(), 0.0, 1.0, 1e-12);
        p.grad_sup = g;
        Ok(p)
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    /// Normalising constant `C`.
    pub fn norm_const(&self) -> f64 {
        self.norm
    }

    /// `‖χ‖∞ = χ(0)`.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    /// `‖∇χ‖∞`.
    pub fn grad_sup(&self) -> f64 {
        self.grad_sup
    }

    #[inline]
    pub fn radial(&self, r: f64) -> f64 {
        if r < 1.0 {
            self.norm * (-self.sharpness / (1.0 - r * r)).exp()
        } else {
            0.0
        }
    }

    pub fn radial_derivative(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - r * r;
        -self.radial(r) * 2.0 * self.sharpness * r / (w * w)
    }

    pub fn eval(&self, y: Vec2) -> f64 {
        self.radial(y.norm())
    }

    /// Draws a point of the unit disc with density χ.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        loop {
            let u = Vec2(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let r2 = u.norm_sq();
            if r2 >= 1.0 {
                continue;
            }
            let accept = (self.sharpness - self.sharpness / (1.0 - r2)).exp();
            if rng.gen::<f64>() < accept {
                return u;
            }
        }
    }
}

/// Profile-dependent tables, shared across every ε.
#[derive(Debug)]
pub struct KernelTables {
    pub ring: RingMassTable,
    pub screening: ScreeningTable,
}

type TableCache = Mutex<Vec<(u64, Arc<BumpProfile>, Arc<KernelTables>)>>;

fn cached(sharpness: f64) -> Result<(Arc<BumpProfile>, Arc<KernelTables>)> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().expect("kernel table cache poisoned");
    if let Some((_, p, t)) = guard.iter().find(|(k, _, _)| *k == sharpness.to_bits()) {
        return Ok((p.clone(), t.clone()));
    }
    let profile = BumpProfile::new(sharpness)?;
    let ring = RingMassTable::build(&profile, TABLE_RESOLUTION, TABLE_RESOLUTION);
    let screening = ScreeningTable::build(&profile, &ring, TABLE_RESOLUTION, TABLE_RESOLUTION);
    let entry = (Arc::new(profile), Arc::new(KernelTables { ring, screening }));
    guard.push((sharpness.to_bits(), entry.0.clone(), entry.1.clone()));
    Ok(entry)
}

/// Mollifier `χ_ε(x, v) = ε⁻⁴ χ(x/ε) χ(v/ε)` with its quadrature settings.
#[derive(Clone, Debug)]
pub struct MollifierSpec {
    eps: f64,
    profile: Arc<BumpProfile>,
    tables: Arc<KernelTables>,
    rule: Arc<GaussLegendre>,
}

impl MollifierSpec {
    /// Standard bump with a 32-point rule.
    pub fn new(eps: f64) -> Result<Self> {
        Self::with_options(eps, 1.0, 32)
    }

    pub fn with_options(eps: f64, sharpness: f64, quad_order: usize) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return domain(format!("mollification scale must be positive, got {eps}"));
        }
        if quad_order < 4 {
            return domain("quadrature order must be at least 4");
        }
        let (profile, tables) = cached(sharpness)?;
        Ok(Self {
            eps,
            profile,
            tables,
            rule: Arc::new(GaussLegendre::new(quad_order)),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn profile(&self) -> &BumpProfile {
        &self.profile
    }

    pub fn tables(&self) -> &KernelTables {
        &self.tables
    }

    pub fn quad_order(&self) -> usize {
        self.rule.len()
    }

    pub fn chi_eps(&self, z: PhasePoint) -> f64 {
        let e = self.eps;
        self.profile.radial(z.x.norm() / e) * self.profile.radial(z.v.norm() / e) / (e * e * e * e)
    }

    /// `m_ε(s, r)`: mass of the disc of radius `r` under `χ_ε` recentred at distance `s`.
    pub fn ring_mass(&self, s: f64, r: f64) -> f64 {
        self.tables.ring.mass(s / self.eps, r / self.eps)
    }

    /// `m_ε(s, r)` by direct quadrature, bypassing the table.
    pub fn ring_mass_direct(&self, s: f64, r: f64) -> f64 {
        tables::ring_mass_direct(&self.profile, s / self.eps, r / self.eps)
    }

    /// `J_ε` by direct quadrature of `χ_ε(· - y) * G(y)` over the support disc,
    /// where `G(y) = y^⊥/(2π|y|²) m_ε(|v|, |y|)`.
    pub fn j_eps(&self, z: PhasePoint) -> Vec2 {
        let e = self.eps;
        let s = z.v.norm() / e;
        let n_theta = 2 * self.rule.len();
        let dth = 2.0 * PI / n_theta as f64;
        let mut acc = Vec2::ZERO;
        for (t, wt) in self.rule.mapped(0.0, 1.0) {
            let weight = wt * t * self.profile.radial(t) * dth;
            for k in 0..n_theta {
                let th = (k as f64 + 0.5) * dth;
                let y = z.x - Vec2(th.cos(), th.sin()) * (e * t);
                let ry = y.norm() / e;
                let g = self.tables.ring.scaled_mass(s, ry) / (2.0 * PI * e * e * (1.0 + ry * ry));
                acc += y.perp() * (g * weight);
            }
        }
        acc
    }

    /// `J_ε` through the tabulated radial profile.
    #[inline]
    pub fn j_eps_tabulated(&self, z: PhasePoint) -> Vec2 {
        self.j_eps_parts(z.x, z.v)
    }

    #[inline]
    pub fn j_eps_parts(&self, x: Vec2, v: Vec2) -> Vec2 {
        let e = self.eps;
        let rx2 = x.norm_sq();
        let rho = rx2.sqrt() / e;
        let s = v.norm() / e;
        if rho - s >= 2.0 {
            return x.perp() * (1.0 / (2.0 * PI * rx2));
        }
        if s - rho >= 2.0 {
            return Vec2::ZERO;
        }
        let t = self.tables.screening.profile(rho, s);
        x.perp() * (t / (2.0 * PI * (e * e + rx2)))
    }

    /// `π‖χ‖∞/ε`, a bound on `sup |J_ε|`.
    pub fn kernel_sup_bound(&self) -> f64 {
        PI * self.profile.sup() / self.eps
    }

    /// `π‖∇χ‖∞/ε²`, a bound on the Lipschitz constant of `J_ε`.
    pub fn kernel_lip_bound(&self) -> f64 {
        PI * self.profile.grad_sup() / (self.eps * self.eps)
    }
}

/// Jittered ensemble representing `f * χ_ε`, plus the identity-coupling cost of the jitter.
pub fn mollify_ensemble<R: Rng + ?Sized>(
    f: &ParticleEnsemble,
    spec: &MollifierSpec,
    rng: &mut R,
) -> Result<(ParticleEnsemble, f64)> {
    let e = spec.eps();
    let mut points = Vec::with_capacity(f.len());
    let mut cost = 0.0;
    for (z, w) in f.iter() {
        let jx = spec.profile().sample(rng) * e;
        let jv = spec.profile().sample(rng) * e;
        let jitter = PhasePoint { x: jx, v: jv };
        cost += w * jitter.norm();
        points.push(z + jitter);
    }
    Ok((ParticleEnsemble::new(points, f.weights().to_vec())?, cost))
}

/// Bound `(1+ε)^{2γ} ‖f‖_γ` on the weighted norm of `f * χ_ε`.
pub fn mollified_gamma_bound(f_gamma: f64, gamma: f64, eps: f64) -> f64 {
    (1.0 + eps).powf(2.0 * gamma) * f_gamma
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_bump_constants() {
        let p = BumpProfile::new(1.0).unwrap();
        assert!((p.norm_const() - 2.143_565_776).abs() < 1e-9, "{}", p.norm_const());
        assert!((p.sup() - p.norm_const() / std::f64::consts::E).abs() < 1e-15);
        assert!(p.grad_sup() > 0.0 && p.grad_sup() < 2.0 * p.norm_const());
    }

    #[test]
    fn bad_scales_rejected() {
        assert!(MollifierSpec::new(0.0).is_err());
        assert!(MollifierSpec::new(-1.0).is_err());
        assert!(BumpProfile::new(0.0).is_err());
    }

    #[test]
    fn table_matches_direct_ring_mass() {
        let spec = MollifierSpec::new(1.0).unwrap();
        for &(s, r) in &[(0.0, 0.3), (0.25, 0.5), (0.7, 0.1), (1.3, 1.1), (3.0, 3.4), (10.0, 9.6)] {
            let direct = spec.ring_mass_direct(s, r);
            let tab = spec.tables().ring.mass(s, r);
            assert!((direct - tab).abs() < 1e-7, "m({s},{r}): {direct} vs {tab}");
        }
    }

    #[test]
    fn tabulated_kernel_matches_quadrature() {
        let spec = MollifierSpec::new(0.2).unwrap();
        for &(x1, x2, v1, v2) in &[
            (0.3, 0.1, 0.0, 0.25),
            (0.05, -0.02, 0.1, 0.0),
            (0.5, 0.5, 0.6, 0.3),
            (-0.1, 0.2, 0.05, 0.05),
        ] {
            let z = PhasePoint::new(x1, x2, v1, v2);
            let a = spec.j_eps(z);
            let b = spec.j_eps_tabulated(z);
            assert!((a - b).norm() < 1e-6, "{z:?}: {a:?} vs {b:?}");
        }
    }

    #[test]
    fn far_field_is_exact() {
        let spec = MollifierSpec::new(0.1).unwrap();
        let z = PhasePoint::new(1.0, 0.5, 0.1, 0.0);
        let exact = crate::kernel::transport(z).unwrap();
        assert_eq!(spec.j_eps_tabulated(z), exact);
        assert!((spec.j_eps(z) - exact).norm() < 1e-9);
    }

    #[test]
    fn jitter_cost_bounded() {
        let spec = MollifierSpec::new(0.1).unwrap();
        let f = ParticleEnsemble::uniform(vec![PhasePoint::ORIGIN; 100]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (g, cost) = mollify_ensemble(&f, &spec, &mut rng).unwrap();
        assert!(cost <= 2.0 * 0.1);
        for (z, _) in g.iter() {
            assert!(z.x.norm() < 0.1 && z.v.norm() < 0.1);
        }
    }
}
