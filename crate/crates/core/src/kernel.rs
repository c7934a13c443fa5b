//! Planar vectors, phase-space points and the screened-logarithm kernel.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this radius the transport kernel refuses to evaluate.
pub const SINGULAR_RADIUS: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2(pub f64, pub f64);

impl Vec2 {
    pub const ZERO: Vec2 = Vec2(0.0, 0.0);

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.0 * o.0 + self.1 * o.1
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.0.hypot(self.1)
    }

    /// Clockwise quarter turn: (a, b) -> (b, -a).
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2(self.1, -self.0)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2(self.0 - o.0, self.1 - o.1)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2(-self.0, -self.1)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2(self.0 * s, self.1 * s)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.0 += o.0;
        self.1 += o.1;
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.0 -= o.0;
        self.1 -= o.1;
    }
}

/// A point (x, v) of the four-dimensional phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec2,
    pub v: Vec2,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint {
        x: Vec2::ZERO,
        v: Vec2::ZERO,
    };

    #[inline]
    pub fn new(x1: f64, x2: f64, v1: f64, v2: f64) -> Self {
        PhasePoint {
            x: Vec2(x1, x2),
            v: Vec2(v1, v2),
        }
    }

    #[inline]
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 4] {
        [self.x.0, self.x.1, self.v.0, self.v.1]
    }

    /// Exchanges the roles of x and v.
    #[inline]
    pub fn swap(self) -> Self {
        PhasePoint {
            x: self.v,
            v: self.x,
        }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        (self.x.norm_sq() + self.v.norm_sq()).sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

impl Add for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn add(self, o: PhasePoint) -> PhasePoint {
        PhasePoint {
            x: self.x + o.x,
            v: self.v + o.v,
        }
    }
}

impl Sub for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn sub(self, o: PhasePoint) -> PhasePoint {
        PhasePoint {
            x: self.x - o.x,
            v: self.v - o.v,
        }
    }
}

impl Neg for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn neg(self) -> PhasePoint {
        PhasePoint {
            x: -self.x,
            v: -self.v,
        }
    }
}

impl Mul<f64> for PhasePoint {
    type Output = PhasePoint;
    #[inline]
    fn mul(self, s: f64) -> PhasePoint {
        PhasePoint {
            x: self.x * s,
            v: self.v * s,
        }
    }
}

impl AddAssign for PhasePoint {
    #[inline]
    fn add_assign(&mut self, o: PhasePoint) {
        self.x += o.x;
        self.v += o.v;
    }
}

/// Screened logarithm `-ln(max(|x|, |v|)) / 2π`.
pub fn potential(z: PhasePoint) -> Result<f64> {
    let m = z.x.norm().max(z.v.norm());
    if m < SINGULAR_RADIUS {
        return Err(Error::Singular {
            x_norm: z.x.norm(),
            v_norm: z.v.norm(),
        });
    }
    Ok(-m.ln() / (2.0 * PI))
}

/// Transport kernel `x^⊥ / (2π|x|²)` on `{|x| >= |v|}` and zero elsewhere.
pub fn transport(z: PhasePoint) -> Result<Vec2> {
    transport_parts(z.x, z.v).ok_or(Error::Singular {
        x_norm: z.x.norm(),
        v_norm: z.v.norm(),
    })
}

/// Same kernel on split arguments; `None` at the singular point.
#[inline]
pub fn transport_parts(x: Vec2, v: Vec2) -> Option<Vec2> {
    let rx2 = x.norm_sq();
    if rx2 < v.norm_sq() {
        return Some(Vec2::ZERO);
    }
    if rx2 < SINGULAR_RADIUS * SINGULAR_RADIUS {
        return None;
    }
    Some(x.perp() * (1.0 / (2.0 * PI * rx2)))
}

/// Both sides of the increment identity for `x ↦ x^⊥/|x|²` and its AM-GM relaxation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncrementIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub relaxed: f64,
}

pub fn increment_identity(x: Vec2, xs: Vec2) -> Result<IncrementIdentity> {
    let (r, rs) = (x.norm(), xs.norm());
    if r == 0.0 || rs == 0.0 {
        return Err(Error::Singular { x_norm: r, v_norm: 0.0 });
    }
    let a = x.perp() * (1.0 / (r * r));
    let b = xs.perp() * (1.0 / (rs * rs));
    let d = (x - xs).norm();
    Ok(IncrementIdentity {
        lhs: (a - b).norm(),
        rhs: d / (r * rs),
        relaxed: 0.5 * (1.0 / (r * r) + 1.0 / (rs * rs)) * d,
    })
}

/// Upper bound on `|J(z) - J(z*)|` from the pointwise variation estimate.
pub fn j_variation_bound(z: PhasePoint, zs: PhasePoint) -> Result<f64> {
    let (rx, rv, rxs, rvs) = (z.x.norm(), z.v.norm(), zs.x.norm(), zs.v.norm());
    if rx == 0.0 || rv == 0.0 || rxs == 0.0 || rvs == 0.0 {
        return Err(Error::Domain(
            "variation bound needs all four planar components nonzero".into(),
        ));
    }
    let dx = (z.x - zs.x).norm();
    let delta = dx + (z.v - zs.v).norm();
    let ind = |b: bool| if b { 1.0 } else { 0.0 };
    let smooth = (ind(rv <= rx) / (rx * rx) + ind(rvs <= rxs) / (rxs * rxs)) * dx / (4.0 * PI);
    let edge = ind(rv <= rx && rx <= rv + delta) / (2.0 * PI * rx)
        + ind(rvs <= rxs && rxs <= rvs + delta) / (2.0 * PI * rxs);
    Ok(smooth + edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perp_rotates_clockwise() {
        assert_eq!(Vec2(1.0, 2.0).perp(), Vec2(2.0, -1.0));
    }

    #[test]
    fn transport_known_value() {
        let j = transport(PhasePoint::new(3.0, 4.0, 0.0, 0.0)).unwrap();
        let expect = Vec2(4.0, -3.0) * (1.0 / (50.0 * PI));
        assert!((j - expect).norm() < 1e-16);
    }

    #[test]
    fn transport_vanishes_inside_velocity_disc() {
        let j = transport(PhasePoint::new(0.1, 0.0, 0.0, 0.2)).unwrap();
        assert_eq!(j, Vec2::ZERO);
        // x = 0 with v != 0 is regular
        assert_eq!(transport(PhasePoint::new(0.0, 0.0, 0.0, 1.0)).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn transport_tie_counts_as_active() {
        let j = transport(PhasePoint::new(1.0, 0.0, 0.0, 1.0)).unwrap();
        assert!((j - Vec2(0.0, -1.0 / (2.0 * PI))).norm() < 1e-16);
    }

    #[test]
    fn singular_points_error() {
        assert!(transport(PhasePoint::ORIGIN).is_err());
        assert!(potential(PhasePoint::ORIGIN).is_err());
        assert!(transport(PhasePoint::new(1e-15, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn potential_example() {
        let k = potential(PhasePoint::new(3.0, 4.0, 1.0, 0.0)).unwrap();
        assert!((k + 5f64.ln() / (2.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn increment_identity_example() {
        let r = increment_identity(Vec2(1.0, 0.0), Vec2(0.0, 2.0)).unwrap();
        assert!((r.lhs - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((r.rhs - 1.25f64.sqrt()).abs() < 1e-15);
        assert!(r.relaxed >= r.rhs);
    }

    #[test]
    fn variation_bound_zero_distance() {
        let z = PhasePoint::new(1.0, 0.5, 0.2, 0.1);
        assert_eq!(j_variation_bound(z, z).unwrap(), 0.0);
        let zs = PhasePoint::new(1.0, 0.5, 1.2, 0.1);
        let diff = (transport(z).unwrap() - transport(zs).unwrap()).norm();
        assert!(diff <= j_variation_bound(z, zs).unwrap());
        assert!(j_variation_bound(PhasePoint::new(1.0, 0.0, 0.0, 0.0), z).is_err());
    }
}
