use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{kappa, ParticleEnsemble};
use crate::error::{domain, Result};
use crate::kernel::{PhasePoint, Vec2};

/// Product of two planar Gaussians truncated at `truncation` standard deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGaussian {
    pub center: PhasePoint,
    pub sigma_x: f64,
    pub sigma_v: f64,
    pub truncation: f64,
}

impl TruncatedGaussian {
    fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0 && self.sigma_v > 0.0 && self.truncation > 0.0) {
            return domain("Gaussian widths and truncation must be positive");
        }
        if !self.center.is_finite() {
            return domain("Gaussian centre must be finite");
        }
        Ok(())
    }

    fn planar(&self, d: Vec2, sigma: f64) -> f64 {
        let r2 = d.norm_sq() / (sigma * sigma);
        if r2 > self.truncation * self.truncation {
            return 0.0;
        }
        let kept = 1.0 - (-0.5 * self.truncation * self.truncation).exp();
        (-0.5 * r2).exp() / (2.0 * PI * sigma * sigma * kept)
    }

    pub fn density(&self, z: PhasePoint) -> f64 {
        let d = z - self.center;
        self.planar(d.x, self.sigma_x) * self.planar(d.v, self.sigma_v)
    }

    fn sample_planar<R: Rng + ?Sized>(&self, rng: &mut R, sigma: f64) -> Vec2 {
        let kept = 1.0 - (-0.5 * self.truncation * self.truncation).exp();
        let u: f64 = rng.gen();
        let r = sigma * (-2.0 * (1.0 - u * kept).ln()).sqrt();
        let th = 2.0 * PI * rng.gen::<f64>();
        Vec2(r * th.cos(), r * th.sin())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let x = self.sample_planar(rng, self.sigma_x);
        let v = self.sample_planar(rng, self.sigma_v);
        self.center + PhasePoint { x, v }
    }

    fn support_distance(&self, z: PhasePoint) -> f64 {
        let d = z - self.center;
        let ex = (d.x.norm() - self.truncation * self.sigma_x).max(0.0);
        let ev = (d.v.norm() - self.truncation * self.sigma_v).max(0.0);
        ex.hypot(ev)
    }

    fn mirrored(&self) -> Self {
        Self {
            center: -self.center,
            ..self.clone()
        }
    }
}

/// Catalog of initial densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialKind {
    Gaussian(TruncatedGaussian),
    /// `(1+|x|)^{-a} (1+|v|)^{-a} / κ_a²`.
    Polynomial { exponent: f64 },
    /// Uniform on `[-b, b]⁴`.
    Uniform { half_width: f64 },
    /// Even mixture of a Gaussian and its mirror image through the origin.
    TwoBump(TruncatedGaussian),
}

/// An initial density, optionally translated by a phase-space shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub kind: InitialKind,
    pub shift: PhasePoint,
}

fn poly_radial_cdf(a: f64, r: f64) -> f64 {
    1.0 - (1.0 + r).powf(1.0 - a) * ((a - 1.0) * r + 1.0)
}

fn poly_radial_sample<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    let mut hi = 1.0;
    while poly_radial_cdf(a, hi) < u {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if poly_radial_cdf(a, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

impl InitialCondition {
    pub fn new(kind: InitialKind) -> Result<Self> {
        let ic = Self {
            kind,
            shift: PhasePoint::ORIGIN,
        };
        ic.validate()?;
        Ok(ic)
    }

    /// Standard two-bump scenario: centres ±((1,0),(0.5,0)), widths 0.5.
    pub fn default_two_bump() -> Self {
        Self {
            kind: InitialKind::TwoBump(TruncatedGaussian {
                center: PhasePoint::new(1.0, 0.0, 0.5, 0.0),
                sigma_x: 0.5,
                sigma_v: 0.5,
                truncation: 4.0,
            }),
            shift: PhasePoint::ORIGIN,
        }
    }

    pub fn shifted(&self, shift: PhasePoint) -> Self {
        Self {
            kind: self.kind.clone(),
            shift: self.shift + shift,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            InitialKind::Gaussian(g) | InitialKind::TwoBump(g) => g.validate(),
            InitialKind::Polynomial { exponent } => kappa(*exponent).map(|_| ()),
            InitialKind::Uniform { half_width } => {
                if *half_width > 0.0 && half_width.is_finite() {
                    Ok(())
                } else {
                    domain("uniform box half-width must be positive")
                }
            }
        }
    }

    pub fn density(&self, z: PhasePoint) -> f64 {
        let z = z - self.shift;
        match &self.kind {
            InitialKind::Gaussian(g) => g.density(z),
            InitialKind::TwoBump(g) => 0.5 * (g.density(z) + g.mirrored().density(z)),
            InitialKind::Polynomial { exponent } => {
                let k = kappa(*exponent).expect("validated exponent");
                ((1.0 + z.x.norm()) * (1.0 + z.v.norm())).powf(-exponent) / (k * k)
            }
            InitialKind::Uniform { half_width } => {
                if z.to_array().iter().all(|c| c.abs() <= *half_width) {
                    (2.0 * half_width).powi(-4)
                } else {
                    0.0
                }
            }
        }
    }

    /// Lower bound on the distance from `z` to the support (0 when unknown).
    pub fn support_distance(&self, z: PhasePoint) -> f64 {
        let z = z - self.shift;
        match &self.kind {
            InitialKind::Gaussian(g) => g.support_distance(z),
            InitialKind::TwoBump(g) => g.support_distance(z).min(g.mirrored().support_distance(z)),
            InitialKind::Polynomial { .. } => 0.0,
            InitialKind::Uniform { half_width } => z
                .to_array()
                .iter()
                .map(|c| (c.abs() - half_width).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let z = match &self.kind {
            InitialKind::Gaussian(g) => g.sample(rng),
            InitialKind::TwoBump(g) => {
                if rng.gen::<bool>() {
                    g.sample(rng)
                } else {
                    g.mirrored().sample(rng)
                }
            }
            InitialKind::Polynomial { exponent } => {
                let mut planar = || {
                    let r = poly_radial_sample(*exponent, rng);
                    let th = 2.0 * PI * rng.gen::<f64>();
                    Vec2(r * th.cos(), r * th.sin())
                };
                let x = planar();
                let v = planar();
                PhasePoint { x, v }
            }
            InitialKind::Uniform { half_width } => {
                let b = *half_width;
                PhasePoint::from_array(std::array::from_fn(|_| rng.gen_range(-b..=b)))
            }
        };
        z + self.shift
    }

    /// `n` equal-weight samples.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<ParticleEnsemble> {
        self.validate()?;
        if n == 0 {
            return domain("cannot sample an empty ensemble");
        }
        let pts = (0..n).map(|_| self.sample_point(rng)).collect();
        ParticleEnsemble::uniform(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polynomial_radial_cdf_limits() {
        assert_eq!(poly_radial_cdf(4.0, 0.0), 0.0);
        assert!((poly_radial_cdf(4.0, 1e9) - 1.0).abs() < 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = poly_radial_sample(4.0, &mut rng);
        assert!(r.is_finite() && r >= 0.0);
    }

    #[test]
    fn polynomial_needs_exponent_above_two() {
        assert!(InitialCondition::new(InitialKind::Polynomial { exponent: 2.0 }).is_err());
        assert!(InitialCondition::new(InitialKind::Polynomial { exponent: 3.0 }).is_ok());
    }

    #[test]
    fn two_bump_is_point_symmetric() {
        let ic = InitialCondition::default_two_bump();
        let z = PhasePoint::new(0.7, -0.2, 0.3, 0.4);
        assert_eq!(ic.density(z), ic.density(-z));
    }

    #[test]
    fn shift_translates_density_and_samples() {
        let ic = InitialCondition::default_two_bump();
        let h = PhasePoint::new(0.05, 0.0, 0.0, 0.0);
        let g = ic.shifted(h);
        let z = PhasePoint::new(0.3, 0.1, -0.2, 0.4);
        assert_eq!(g.density(z + h), ic.density(z));
        let a = ic.sample(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = g.sample(5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            assert!(((*q - *p) - h).norm() < 1e-15);
        }
    }

    #[test]
    fn samples_respect_support() {
        let ic = InitialCondition::default_two_bump();
        let e = ic.sample(2000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for &z in e.points() {
            assert_eq!(ic.support_distance(z), 0.0);
        }
    }
}
