//! Self-consistent fields `U = J * f` and `A = J ∘ S * f`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{self, PhasePoint, Vec2};
use crate::measures::{kappa, GridDensity, ParticleEnsemble};
use crate::mollify::MollifierSpec;

/// `2^{5/4} / (3√π)`, the constant of the interpolation bound on `|U|`.
pub fn sup_bound_constant() -> f64 {
    2f64.powf(1.25) / (3.0 * PI.sqrt())
}

/// Interaction kernel used for field sums.
#[derive(Clone, Debug)]
pub enum FieldKernel {
    /// Unmollified kernel; singular on the diagonal.
    Exact,
    Mollified(MollifierSpec),
}

impl FieldKernel {
    pub fn mollified(eps: f64) -> Result<Self> {
        Ok(FieldKernel::Mollified(MollifierSpec::new(eps)?))
    }

    pub fn eps(&self) -> f64 {
        match self {
            FieldKernel::Exact => 0.0,
            FieldKernel::Mollified(m) => m.eps(),
        }
    }

    /// Contribution of a unit mass at separation `d`: `(J(dx, dv), J(dv, dx))`.
    /// `None` only at the singular point of the exact kernel.
    #[inline]
    pub fn pair(&self, d: PhasePoint) -> Option<PhasePoint> {
        match self {
            FieldKernel::Exact => {
                let u = kernel::transport_parts(d.x, d.v)?;
                let a = kernel::transport_parts(d.v, d.x)?;
                Some(PhasePoint { x: u, v: a })
            }
            FieldKernel::Mollified(m) => Some(mollified_pair(m, d)),
        }
    }

    /// `sup |J_ε|` bound; infinite for the exact kernel.
    pub fn sup_bound(&self) -> f64 {
        match self {
            FieldKernel::Exact => f64::INFINITY,
            FieldKernel::Mollified(m) => m.kernel_sup_bound(),
        }
    }
}

#[inline]
fn mollified_pair(m: &MollifierSpec, d: PhasePoint) -> PhasePoint {
    let e = m.eps();
    let rx2 = d.x.norm_sq();
    let rv2 = d.v.norm_sq();
    let rho = rx2.sqrt() / e;
    let s = rv2.sqrt() / e;
    let screening = &m.tables().screening;
    let one = |w: Vec2, r2: f64, a: f64, b: f64| -> Vec2 {
        if a - b >= 2.0 {
            w.perp() * (1.0 / (2.0 * PI * r2))
        } else if b - a >= 2.0 {
            Vec2::ZERO
        } else {
            w.perp() * (screening.profile(a, b) / (2.0 * PI * (e * e + r2)))
        }
    };
    PhasePoint {
        x: one(d.x, rx2, rho, s),
        v: one(d.v, rv2, s, rho),
    }
}

/// What produced a field value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    Ensemble,
    Grid,
}

/// Field source: particles or a grid density.
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    Ensemble(&'a ParticleEnsemble),
    Grid(&'a GridDensity),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldEvaluation {
    pub z: PhasePoint,
    pub u: Vec2,
    pub a: Vec2,
    pub source: SourceKind,
    pub eps: f64,
}

impl FieldEvaluation {
    /// Phase-space velocity `(U, A)`.
    pub fn velocity(&self) -> PhasePoint {
        PhasePoint {
            x: self.u,
            v: self.a,
        }
    }
}

/// Sum over point masses; an exactly coincident atom is skipped.
fn sum_atoms<I>(atoms: I, z: PhasePoint, kernel: &FieldKernel) -> Result<PhasePoint>
where
    I: Iterator<Item = (PhasePoint, f64)>,
{
    let mut acc = PhasePoint::ORIGIN;
    for (y, w) in atoms {
        let d = z - y;
        if d == PhasePoint::ORIGIN {
            continue;
        }
        match kernel.pair(d) {
            Some(k) => acc += k * w,
            None => {
                return Err(Error::Singular {
                    x_norm: d.x.norm(),
                    v_norm: d.v.norm(),
                })
            }
        }
    }
    Ok(acc)
}

const REFINE: usize = 3;

/// Midpoint rule over grid cells; cells within 1.1 cell diagonals of `z` are
/// split `3⁴` ways. The radius avoids lattice distances, so mirror-image cells
/// are always treated alike.
fn sum_grid(grid: &GridDensity, z: PhasePoint, kernel: &FieldKernel) -> PhasePoint {
    let spec = grid.spec();
    let h = spec.step();
    let vol = spec.cell_volume();
    let diag = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut acc = PhasePoint::ORIGIN;
    for (c, f) in grid.iter_cells() {
        if f == 0.0 {
            continue;
        }
        let d = z - c;
        if d.norm() < 1.1 * diag {
            let sub = REFINE.pow(4);
            let w = f * vol / sub as f64;
            for k in 0..sub {
                let mut off = [0.0; 4];
                let mut rem = k;
                for (axis, o) in off.iter_mut().enumerate() {
                    let i = rem % REFINE;
                    rem /= REFINE;
                    *o = ((i as f64 + 0.5) / REFINE as f64 - 0.5) * h[axis];
                }
                let ds = d - PhasePoint::from_array(off);
                if let Some(kv) = kernel.pair(ds) {
                    acc += kv * w;
                }
            }
            continue;
        }
        if let Some(kv) = kernel.pair(d) {
            acc += kv * (f * vol);
        }
    }
    acc
}

/// `(U, A)` at `z` generated by `source`.
pub fn eval_field(source: Source<'_>, z: PhasePoint, kernel: &FieldKernel) -> Result<FieldEvaluation> {
    let (vel, kind) = match source {
        Source::Ensemble(f) => (sum_atoms(f.iter(), z, kernel)?, SourceKind::Ensemble),
        Source::Grid(g) => (sum_grid(g, z, kernel), SourceKind::Grid),
    };
    Ok(FieldEvaluation {
        z,
        u: vel.x,
        a: vel.v,
        source: kind,
        eps: kernel.eps(),
    })
}

/// [`eval_field`] at many points, in parallel.
pub fn eval_fields(
    source: Source<'_>,
    zs: &[PhasePoint],
    kernel: &FieldKernel,
) -> Result<Vec<FieldEvaluation>> {
    zs.par_iter().map(|&z| eval_field(source, z, kernel)).collect()
}

/// Velocities `(U, A)` of every particle from all the others.
///
/// On one thread pairs are visited once and the antisymmetry `J(-d) = -J(d)`
/// supplies the reaction; otherwise rows are summed independently in parallel.
pub fn self_fields(f: &ParticleEnsemble, kernel: &FieldKernel) -> Result<Vec<PhasePoint>> {
    self_fields_of(f.points(), f.weights(), kernel)
}

pub(crate) fn self_fields_of(
    pts: &[PhasePoint],
    wts: &[f64],
    kernel: &FieldKernel,
) -> Result<Vec<PhasePoint>> {
    let n = pts.len();
    let singular = |d: PhasePoint| Error::Singular {
        x_norm: d.x.norm(),
        v_norm: d.v.norm(),
    };
    if rayon::current_num_threads() > 1 {
        return (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = PhasePoint::ORIGIN;
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let d = pts[i] - pts[j];
                    acc += kernel.pair(d).ok_or_else(|| singular(d))? * wts[j];
                }
                Ok(acc)
            })
            .collect();
    }
    let mut out = vec![PhasePoint::ORIGIN; n];
    for i in 0..n {
        let zi = pts[i];
        let wi = wts[i];
        let mut acc = PhasePoint::ORIGIN;
        for j in (i + 1)..n {
            let d = zi - pts[j];
            let k = kernel.pair(d).ok_or_else(|| singular(d))?;
            acc += k * wts[j];
            out[j] += k * (-wi);
        }
        out[i] += acc;
    }
    Ok(out)
}

/// `c ‖f‖∞^{1/4} ‖f‖₁^{3/4}`.
pub fn field_sup_bound(l1: f64, linf: f64) -> f64 {
    sup_bound_constant() * linf.powf(0.25) * l1.powf(0.75)
}

/// `3 κ_γ ‖f‖_γ`.
pub fn field_lip_bound(gamma_norm: f64, gamma: f64) -> Result<f64> {
    Ok(3.0 * kappa(gamma)? * gamma_norm)
}

/// Central-difference divergence `∇_x·U + ∇_v·A` at `z`.
pub fn divergence_fd(source: Source<'_>, z: PhasePoint, kernel: &FieldKernel, h: f64) -> Result<f64> {
    let mut div = 0.0;
    for axis in 0..4 {
        let mut e = [0.0; 4];
        e[axis] = h;
        let e = PhasePoint::from_array(e);
        let fp = eval_field(source, z + e, kernel)?.velocity().to_array()[axis];
        let fm = eval_field(source, z - e, kernel)?.velocity().to_array()[axis];
        div += (fp - fm) / (2.0 * h);
    }
    Ok(div)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sup_constant_value() {
        assert!((sup_bound_constant() - 0.447_292_18).abs() < 1e-8);
    }

    #[test]
    fn two_particles_exact() {
        let f = ParticleEnsemble::uniform(vec![
            PhasePoint::new(1.0, 0.0, 0.0, 0.0),
            PhasePoint::new(0.0, 0.0, 0.0, 0.0),
        ])
        .unwrap();
        let v = self_fields(&f, &FieldKernel::Exact).unwrap();
        // particle 0 sees d = (1,0,0,0): U = 0.5 * (0,-1)/(2π), A = 0 since |dv| < |dx|
        assert!((v[0].x - Vec2(0.0, -0.25 / PI)).norm() < 1e-16);
        assert_eq!(v[0].v, Vec2::ZERO);
        assert!((v[1].x + v[0].x).norm() < 1e-16);
    }

    #[test]
    fn coincident_particles_error_without_mollifier() {
        let p = PhasePoint::new(0.3, 0.0, 0.1, 0.0);
        let f = ParticleEnsemble::uniform(vec![p, p]).unwrap();
        assert!(self_fields(&f, &FieldKernel::Exact).is_err());
        let m = FieldKernel::mollified(0.1).unwrap();
        let v = self_fields(&f, &m).unwrap();
        assert_eq!(v[0], PhasePoint::ORIGIN);
    }

    #[test]
    fn self_exclusion_at_source_point() {
        let p = PhasePoint::new(0.3, 0.2, 0.1, 0.0);
        let q = PhasePoint::new(-0.3, 0.1, 0.0, 0.2);
        let f = ParticleEnsemble::uniform(vec![p, q]).unwrap();
        let ev = eval_field(Source::Ensemble(&f), p, &FieldKernel::Exact).unwrap();
        let v = self_fields(&f, &FieldKernel::Exact).unwrap();
        assert!((ev.velocity() - v[0]).norm() < 1e-16);
    }
}
