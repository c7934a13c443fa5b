use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernel::PhasePoint;

/// Uniform cell-centred grid on the box `Π [-L_i, L_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: [f64; 4],
    n: [usize; 4],
}

impl GridSpec {
    pub fn new(half_width: [f64; 4], n: [usize; 4]) -> Result<Self> {
        if half_width.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return domain("grid half-widths must be positive");
        }
        if n.iter().any(|&k| k == 0) {
            return domain("grid cell counts must be positive");
        }
        Ok(Self { half_width, n })
    }

    pub fn cube(half_width: f64, n: usize) -> Result<Self> {
        Self::new([half_width; 4], [n; 4])
    }

    pub fn half_width(&self) -> [f64; 4] {
        self.half_width
    }

    pub fn counts(&self) -> [usize; 4] {
        self.n
    }

    pub fn step(&self) -> [f64; 4] {
        std::array::from_fn(|i| 2.0 * self.half_width[i] / self.n[i] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.step().iter().product()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centre of the cell with linear index `k`.
    pub fn center(&self, k: usize) -> PhasePoint {
        let h = self.step();
        let mut rem = k;
        let mut c = [0.0; 4];
        for axis in (0..4).rev() {
            let i = rem % self.n[axis];
            rem /= self.n[axis];
            c[axis] = -self.half_width[axis] + (i as f64 + 0.5) * h[axis];
        }
        PhasePoint::from_array(c)
    }

    /// Linear index of the cell containing `z`, if inside the box.
    pub fn locate(&self, z: PhasePoint) -> Option<usize> {
        let h = self.step();
        let a = z.to_array();
        let mut k = 0usize;
        for axis in 0..4 {
            let t = (a[axis] + self.half_width[axis]) / h[axis];
            if !(t >= 0.0 && t < self.n[axis] as f64) {
                return None;
            }
            k = k * self.n[axis] + t as usize;
        }
        Some(k)
    }

    pub fn contains(&self, z: PhasePoint) -> bool {
        self.locate(z).is_some()
    }

    /// Euclidean distance from `z` to the box (0 inside).
    pub fn distance_outside(&self, z: PhasePoint) -> f64 {
        z.to_array()
            .iter()
            .zip(self.half_width)
            .map(|(c, l)| (c.abs() - l).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Cell values of a density on a [`GridSpec`], with the mass missing from the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    spec: GridSpec,
    values: Vec<f64>,
    truncation_mass: f64,
}

impl GridDensity {
    /// Samples `f` at cell centres.
    pub fn from_fn<F: Fn(PhasePoint) -> f64 + Sync>(spec: &GridSpec, f: F) -> Self {
        let values = (0..spec.len())
            .into_par_iter()
            .map(|k| f(spec.center(k)))
            .collect();
        Self::from_values(spec.clone(), values).expect("length matches by construction")
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return domain(format!(
                "grid has {} cells but {} values were given",
                spec.len(),
                values.len()
            ));
        }
        let mut g = Self {
            spec,
            values,
            truncation_mass: 0.0,
        };
        g.truncation_mass = 1.0 - g.mass();
        Ok(g)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Midpoint-rule total mass.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Unit mass minus the grid mass; reported, never renormalised away.
    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (PhasePoint, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| (self.spec.center(k), v))
    }

    /// Nonzero cells as weighted atoms `(centre, f * cell volume)`.
    pub fn atoms(&self) -> Vec<(PhasePoint, f64)> {
        let vol = self.spec.cell_volume();
        self.iter_cells()
            .filter(|(_, v)| *v != 0.0)
            .map(|(z, v)| (z, v * vol))
            .collect()
    }

    /// Value of the cell containing `z`, zero outside the box.
    pub fn value_at(&self, z: PhasePoint) -> f64 {
        self.spec.locate(z).map_or(0.0, |k| self.values[k])
    }
}
