//! Scale-free lookup tables for the mollified kernel.
//!
//! Both tables live on coordinates `(s, d)` with `s >= 0` mapped to
//! `q = s / (s + S0)` and `d` restricted to a band `|d| < w` outside of which
//! the tabulated quantity has a closed form. The last `q` row is the planar
//! limit `s -> ∞`.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::BumpProfile;
use crate::quadrature::GaussLegendre;

const S0: f64 = 2.0;
const GUARD: usize = 2;

#[derive(Clone, Debug)]
pub(crate) struct BandTable {
    half_band: f64,
    nq: usize,
    nd: usize,
    step_d: f64,
    data: Vec<f64>,
}

#[inline]
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

impl BandTable {
    fn build<F>(half_band: f64, nq: usize, nd: usize, row: F) -> Self
    where
        F: Fn(f64, &[f64]) -> Vec<f64> + Sync,
    {
        let step_d = 2.0 * half_band / (nd - 1) as f64;
        let width = nd + 2 * GUARD;
        let ds: Vec<f64> = (0..width)
            .map(|j| -half_band + (j as f64 - GUARD as f64) * step_d)
            .collect();
        let rows: Vec<Vec<f64>> = (0..nq)
            .into_par_iter()
            .map(|i| {
                let q = i as f64 / (nq - 1) as f64;
                let s = if i == nq - 1 {
                    f64::INFINITY
                } else {
                    S0 * q / (1.0 - q)
                };
                row(s, &ds)
            })
            .collect();
        let data = rows.into_iter().flatten().collect();
        Self {
            half_band,
            nq,
            nd,
            step_d,
            data,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.nd + 2 * GUARD
    }

    #[inline]
    fn d_stencil(&self, d: f64) -> (usize, [f64; 4]) {
        let pos = (d + self.half_band) / self.step_d;
        let j = (pos.floor() as isize).clamp(0, self.nd as isize - 2) as usize;
        (j + GUARD - 1, catmull_rom(pos - j as f64))
    }

    /// Interpolated value for `s >= 0` and `|d| < w`.
    #[inline]
    pub(crate) fn lookup(&self, s: f64, d: f64) -> f64 {
        let q = s / (s + S0);
        let pos = q * (self.nq - 1) as f64;
        let i = (pos.floor() as isize).min(self.nq as isize - 2);
        let wq = catmull_rom(pos - i as f64);
        let (j0, wd) = self.d_stencil(d);
        let width = self.width();
        let mut acc = 0.0;
        for (k, wk) in wq.iter().enumerate() {
            let row = (i - 1 + k as isize).unsigned_abs().min(self.nq - 1);
            let base = row * width + j0;
            let r = &self.data[base..base + 4];
            acc += wk * (wd[0] * r[0] + wd[1] * r[1] + wd[2] * r[2] + wd[3] * r[3]);
        }
        acc
    }

    /// Interpolation along the planar-limit row.
    pub(crate) fn lookup_planar(&self, d: f64) -> f64 {
        let (j0, wd) = self.d_stencil(d);
        let base = (self.nq - 1) * self.width() + j0;
        let r = &self.data[base..base + 4];
        wd[0] * r[0] + wd[1] * r[1] + wd[2] * r[2] + wd[3] * r[3]
    }
}

/// Ring mass `m(s, r) = P(|s e1 + U| <= r)` for `U` distributed by the unit-scale bump,
/// stored as `m (1 + r²) / r²` so that small radii keep their relative accuracy.
#[derive(Clone, Debug)]
pub struct RingMassTable {
    table: BandTable,
}

/// Radial profile `T(ρ, s)` of the mollified transport kernel, stored as
/// `F (1 + ρ²) / ρ²` where `F(ρ, s)` is the mollified indicator of `{ρ >= s}`.
#[derive(Clone, Debug)]
pub struct ScreeningTable {
    table: BandTable,
}

struct Rules {
    radial: GaussLegendre,
    arc: GaussLegendre,
    density: GaussLegendre,
}

fn rules() -> Rules {
    Rules {
        radial: GaussLegendre::new(40),
        arc: GaussLegendre::new(64),
        density: GaussLegendre::new(64),
    }
}

/// Mass of the disc of radius `a` under the bump.
fn disc_mass(p: &BumpProfile, gl: &GaussLegendre, a: f64) -> f64 {
    if a >= 1.0 {
        return 1.0;
    }
    if a <= 0.0 {
        return 0.0;
    }
    2.0 * PI * gl.integrate(0.0, a, |t| p.radial(t) * t)
}

/// Direct evaluation of the ring mass.
pub(crate) fn ring_mass_direct(p: &BumpProfile, s: f64, r: f64) -> f64 {
    let rl = rules();
    ring_mass_with(p, &rl, s, r)
}

fn ring_mass_with(p: &BumpProfile, rl: &Rules, s: f64, r: f64) -> f64 {
    let (s, r) = (s.abs(), r.abs());
    if r >= s + 1.0 {
        return 1.0;
    }
    if r <= s - 1.0 || r == 0.0 {
        return 0.0;
    }
    if s == 0.0 {
        return disc_mass(p, &rl.radial, r);
    }
    let inner = if r > s { disc_mass(p, &rl.radial, r - s) } else { 0.0 };
    let ta = (r - s).abs();
    let tb = (r + s).min(1.0);
    if tb <= ta {
        return inner;
    }
    let span = tb - ta;
    let middle = rl.arc.integrate(0.0, 1.0, |u| {
        let t = ta + span * 0.5 * (1.0 - (PI * u).cos());
        let jac = span * 0.5 * PI * (PI * u).sin();
        let c = ((r * r - s * s - t * t) / (2.0 * s * t)).clamp(-1.0, 1.0);
        p.radial(t) * t * (2.0 * PI - 2.0 * c.acos()) * jac
    });
    (inner + middle).clamp(0.0, 1.0)
}

/// Density of the marginal of the bump on one axis.
fn marginal_density(p: &BumpProfile, gl: &GaussLegendre, t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let h = (1.0 - t * t).sqrt();
    2.0 * gl.integrate(0.0, h, |u| p.radial((t * t + u * u).sqrt()))
}

/// Angular integral `∫ χ(|r e^{iθ} - s e1|) dθ`.
fn arc_integral(p: &BumpProfile, gl: &GaussLegendre, r: f64, s: f64) -> f64 {
    if s == 0.0 || r == 0.0 {
        return 2.0 * PI * p.radial(r.max(s));
    }
    let c = (r * r + s * s - 1.0) / (2.0 * r * s);
    if c >= 1.0 {
        return 0.0;
    }
    let th = if c <= -1.0 { PI } else { c.acos() };
    2.0 * gl.integrate(0.0, th, |t| {
        let d2 = (r * r + s * s - 2.0 * r * s * t.cos()).max(0.0);
        p.radial(d2.sqrt())
    })
}

impl RingMassTable {
    pub(crate) fn build(p: &BumpProfile, nq: usize, nd: usize) -> Self {
        let rl = rules();
        let planar_gl = GaussLegendre::new(48);
        let table = BandTable::build(1.0, nq, nd, |s, ds| {
            ds.iter()
                .map(|&d| {
                    if s.is_infinite() {
                        let hi = d.clamp(-1.0, 1.0);
                        return planar_gl.integrate(-1.0, hi, |t| marginal_density(p, &planar_gl, t));
                    }
                    let r = (s + d).abs();
                    if r < 1e-7 {
                        return PI * p.radial(s);
                    }
                    ring_mass_with(p, &rl, s, r) * (1.0 + r * r) / (r * r)
                })
                .collect()
        });
        Self { table }
    }

    /// `m(s, r) (1 + r²) / r²` at unit scale.
    #[inline]
    pub fn scaled_mass(&self, s: f64, r: f64) -> f64 {
        let (s, r) = (s.abs(), r.abs());
        let d = r - s;
        if d >= 1.0 {
            return (1.0 + r * r) / (r * r);
        }
        if d <= -1.0 {
            return 0.0;
        }
        self.table.lookup(s, d).max(0.0)
    }

    /// `m(s, r)` at unit scale.
    pub fn mass(&self, s: f64, r: f64) -> f64 {
        let (s, r) = (s.abs(), r.abs());
        if r - s >= 1.0 {
            return 1.0;
        }
        (self.scaled_mass(s, r) * r * r / (1.0 + r * r)).clamp(0.0, 1.0)
    }
}

impl ScreeningTable {
    pub(crate) fn build(p: &BumpProfile, ring: &RingMassTable, nq: usize, nd: usize) -> Self {
        let rl = rules();
        let planar_gl = GaussLegendre::new(48);
        let table = BandTable::build(2.0, nq, nd, |s, ds| {
            if s.is_infinite() {
                let nodes: Vec<(f64, f64)> = planar_gl
                    .mapped(-1.0, 1.0)
                    .map(|(t, w)| (t, w * marginal_density(p, &planar_gl, t)))
                    .collect();
                return ds
                    .iter()
                    .map(|&d| {
                        nodes
                            .iter()
                            .map(|&(t, w)| {
                                let e = d - t;
                                let m = if e >= 1.0 {
                                    1.0
                                } else if e <= -1.0 {
                                    0.0
                                } else {
                                    ring.table.lookup_planar(e)
                                };
                                w * m
                            })
                            .sum()
                    })
                    .collect();
            }
            let lo = (s - 1.0).max(0.0);
            let hi = s + 1.0;
            let nodes: Vec<(f64, f64)> = rl
                .density
                .mapped(lo, hi)
                .map(|(r, w)| (r, w * r * arc_integral(p, &rl.arc, r, s)))
                .collect();
            ds.iter()
                .map(|&d| {
                    let rho = s + d;
                    nodes
                        .iter()
                        .map(|&(r, w)| w * ring.scaled_mass(r, rho))
                        .sum::<f64>()
                })
                .collect()
        });
        Self { table }
    }

    /// `T(ρ, s)` at unit scale.
    #[inline]
    pub fn profile(&self, rho: f64, s: f64) -> f64 {
        let d = rho - s;
        if d >= 2.0 {
            return (1.0 + rho * rho) / (rho * rho);
        }
        if d <= -2.0 {
            return 0.0;
        }
        self.table.lookup(s, d).max(0.0)
    }

    /// Mollified indicator `F(ρ, s)`.
    pub fn indicator(&self, rho: f64, s: f64) -> f64 {
        if rho - s >= 2.0 {
            return 1.0;
        }
        if rho == 0.0 {
            return 0.0;
        }
        self.profile(rho, s) * rho * rho / (1.0 + rho * rho)
    }
}
