//! Particle ensembles, grid densities, weighted norms and initial conditions.

mod grid;
mod initial;
pub(crate) mod snapshot;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::PhasePoint;

pub use grid::{GridDensity, GridSpec};
pub use initial::{InitialCondition, InitialKind, TruncatedGaussian};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};

/// Weighted point masses in phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    points: Vec<PhasePoint>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    /// Validates finiteness, positivity and unit total weight.
    pub fn new(points: Vec<PhasePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Mismatch(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return domain("an ensemble needs at least one particle");
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return domain(format!("particle {i} has a non-finite coordinate"));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return domain(format!("particle {i} has invalid weight {}", weights[i]));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(Self { points, weights })
    }

    /// Equal weights `1/N`.
    pub fn uniform(points: Vec<PhasePoint>) -> Result<Self> {
        let n = points.len().max(1);
        Self::new(points, vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (PhasePoint, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// True when every weight equals the first one.
    pub fn has_uniform_weights(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| (w - w0).abs() <= 1e-15 * w0)
    }

    /// Same weights, new positions.
    pub fn with_points(&self, points: Vec<PhasePoint>) -> Result<Self> {
        Self::new(points, self.weights.clone())
    }

    /// Every particle translated by `shift`.
    pub fn translated(&self, shift: PhasePoint) -> Self {
        Self {
            points: self.points.iter().map(|&p| p + shift).collect(),
            weights: self.weights.clone(),
        }
    }

    /// `∫ |z| dμ`.
    pub fn first_moment(&self) -> f64 {
        self.iter().map(|(z, w)| w * z.norm()).sum()
    }
}

/// `κ_γ = ∫_{R²} (1+|x|)^{-γ} dx = 2π / ((γ-1)(γ-2))`.
pub fn kappa(gamma: f64) -> Result<f64> {
    if !(gamma.is_finite() && gamma > 2.0) {
        return domain(format!("weight exponent must exceed 2, got {gamma}"));
    }
    Ok(2.0 * PI / ((gamma - 1.0) * (gamma - 2.0)))
}

/// Weight `(1+|x|)^γ (1+|v|)^γ`.
#[inline]
pub fn gamma_weight(z: PhasePoint, gamma: f64) -> f64 {
    ((1.0 + z.x.norm()) * (1.0 + z.v.norm())).powf(gamma)
}

/// Sup of `(1+|x|)^γ (1+|v|)^γ f` over cell centres.
pub fn gamma_norm(grid: &GridDensity, gamma: f64) -> Result<f64> {
    kappa(gamma)?;
    Ok(grid
        .iter_cells()
        .map(|(z, f)| gamma_weight(z, gamma) * f.abs())
        .fold(0.0, f64::max))
}

/// Midpoint-rule `L^p` norm; pass `f64::INFINITY` for the sup norm.
pub fn lp_norm(grid: &GridDensity, p: f64) -> Result<f64> {
    if p.is_infinite() && p > 0.0 {
        return Ok(grid.values().iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    if !(p.is_finite() && p >= 1.0) {
        return domain(format!("L^p exponent must be at least 1, got {p}"));
    }
    let vol = grid.spec().cell_volume();
    let s: f64 = grid.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok((s * vol).powf(1.0 / p))
}

/// `∫ |z| dμ` for a particle ensemble.
pub fn first_moment(f: &ParticleEnsemble) -> f64 {
    f.first_moment()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_values() {
        assert!((kappa(3.0).unwrap() - PI).abs() < 1e-15);
        assert!((kappa(4.0).unwrap() - PI / 3.0).abs() < 1e-15);
        assert!(kappa(2.0).is_err());
        assert!(kappa(1.5).is_err());
    }

    #[test]
    fn ensemble_validation() {
        let p = PhasePoint::ORIGIN;
        assert!(ParticleEnsemble::new(vec![p, p], vec![0.5, 0.4]).is_err());
        assert!(ParticleEnsemble::new(vec![p, p], vec![1.5, -0.5]).is_err());
        assert!(ParticleEnsemble::new(vec![p], vec![0.5, 0.5]).is_err());
        let e = ParticleEnsemble::uniform(vec![p; 4]).unwrap();
        assert!(e.has_uniform_weights());
        assert_eq!(e.len(), 4);
    }

    #[test]
    fn first_moment_point_mass() {
        let e = ParticleEnsemble::uniform(vec![PhasePoint::new(3.0, 0.0, 0.0, 4.0)]).unwrap();
        assert!((e.first_moment() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_norm_of_unit_box_indicator() {
        let spec = GridSpec::cube(2.0, 40).unwrap();
        let grid = GridDensity::from_fn(&spec, |z| {
            let a = z.to_array();
            if a.iter().all(|&c| (0.0..=1.0).contains(&c)) { 1.0 } else { 0.0 }
        });
        let n = gamma_norm(&grid, 3.0).unwrap();
        let exact = (1.0 + 2f64.sqrt()).powi(6);
        let h = spec.step()[0];
        let lower = (1.0 + 2f64.sqrt() * (1.0 - h)).powi(6);
        assert!(n <= exact && n >= lower, "{n}");
    }

    #[test]
    fn lp_norms_of_constant() {
        let spec = GridSpec::cube(1.0, 4).unwrap();
        let grid = GridDensity::from_fn(&spec, |_| 0.5);
        assert!((lp_norm(&grid, 1.0).unwrap() - 0.5 * 16.0).abs() < 1e-12);
        assert!((lp_norm(&grid, f64::INFINITY).unwrap() - 0.5).abs() < 1e-15);
        assert!(lp_norm(&grid, 0.5).is_err());
    }
}
