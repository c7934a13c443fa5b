//! Characteristic flow of the mollified system, tracers and reverse flow.

mod io;
mod semilag;

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fields::{self, FieldKernel};
use crate::kernel::PhasePoint;
use crate::measures::ParticleEnsemble;

pub use io::{read_trace, snapshot_steps, write_trace, TraceFile, TraceHeader};
pub use semilag::{semilag_density, SemilagOptions, SemilagStats};

/// Integration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Largest phase-space displacement allowed for one particle in one step.
    pub max_step_displacement: f64,
    /// Permit the unmollified kernel (experimental; aborts on near-collisions).
    pub allow_unmollified: bool,
}

impl FlowConfig {
    pub fn new(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            max_step_displacement: 2.5,
            allow_unmollified: false,
        }
    }

    fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return domain(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return domain(format!("final time must be non-negative, got {}", self.t_final));
        }
        let k = (self.t_final / self.dt).round();
        if (k * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return domain(format!(
                "final time {} is not a multiple of the step {}",
                self.t_final, self.dt
            ));
        }
        Ok(k as usize)
    }
}

/// Particle positions and velocities at every step, with cubic Hermite dense output.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    kernel: FieldKernel,
    dt: f64,
    weights: Vec<f64>,
    positions: Vec<Vec<PhasePoint>>,
    velocities: Vec<Vec<PhasePoint>>,
    max_speed: f64,
}

fn axpy(y: &[PhasePoint], a: f64, k: &[PhasePoint]) -> Vec<PhasePoint> {
    y.iter().zip(k).map(|(&p, &q)| p + q * a).collect()
}

/// Fixed-step RK4 for the particle system `dX/dt = U_ε, dV/dt = A_ε`.
pub fn integrate(f0: &ParticleEnsemble, kernel: FieldKernel, cfg: &FlowConfig) -> Result<FlowTrace> {
    let steps = cfg.steps()?;
    if matches!(kernel, FieldKernel::Exact) && !cfg.allow_unmollified {
        return domain("the unmollified kernel needs the experimental flag");
    }
    let dt = cfg.dt;
    let w = f0.weights();
    let field = |y: &[PhasePoint], t: f64| -> Result<Vec<PhasePoint>> {
        fields::self_fields_of(y, w, &kernel).map_err(|e| match e {
            Error::Singular { .. } => Error::NearSingular(t),
            other => other,
        })
    };
    let mut y = f0.points().to_vec();
    let mut k1 = field(&y, 0.0)?;
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let mut max_speed = k1.iter().map(|k| k.norm()).fold(0.0, f64::max);
    for step in 0..steps {
        let t = step as f64 * dt;
        let k2 = field(&axpy(&y, 0.5 * dt, &k1), t + 0.5 * dt)?;
        let k3 = field(&axpy(&y, 0.5 * dt, &k2), t + 0.5 * dt)?;
        let k4 = field(&axpy(&y, dt, &k3), t + dt)?;
        let next: Vec<PhasePoint> = (0..y.len())
            .map(|i| y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
            .collect();
        for (i, (a, b)) in y.iter().zip(&next).enumerate() {
            let disp = (*b - *a).norm();
            if !(disp <= cfg.max_step_displacement) {
                return Err(Error::StepGuard {
                    time: t,
                    index: i,
                    displacement: disp,
                    limit: cfg.max_step_displacement,
                });
            }
        }
        positions.push(std::mem::replace(&mut y, next));
        velocities.push(std::mem::replace(&mut k1, field(&y, t + dt)?));
        max_speed = k1.iter().map(|k| k.norm()).fold(max_speed, f64::max);
    }
    positions.push(y);
    velocities.push(k1);
    Ok(FlowTrace {
        kernel,
        dt,
        weights: w.to_vec(),
        positions,
        velocities,
        max_speed,
    })
}

impl FlowTrace {
    pub fn kernel(&self) -> &FieldKernel {
        &self.kernel
    }

    pub fn eps(&self) -> f64 {
        self.kernel.eps()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn t_final(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest particle speed `|(U, A)|` seen at any step.
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    pub fn positions_at_step(&self, step: usize) -> &[PhasePoint] {
        &self.positions[step]
    }

    pub fn velocities_at_step(&self, step: usize) -> &[PhasePoint] {
        &self.velocities[step]
    }

    pub fn ensemble_at_step(&self, step: usize) -> ParticleEnsemble {
        ParticleEnsemble::new(self.positions[step].clone(), self.weights.clone())
            .expect("trace holds validated weights")
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let tf = self.t_final();
        if !(t >= 0.0 && t <= tf * (1.0 + 1e-12) + 1e-15) {
            return Err(Error::TimeOutOfRange { time: t, t_final: tf });
        }
        Ok(())
    }

    /// Step index when `t` lies on the step grid.
    pub fn step_of(&self, t: f64) -> Option<usize> {
        let k = (t / self.dt).round();
        if k >= 0.0 && (k as usize) <= self.steps() && (k * self.dt - t).abs() <= 1e-12 * t.max(1.0) {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Particle positions at time `t`, stored or Hermite-interpolated.
    pub fn positions_at(&self, t: f64) -> Result<Cow<'_, [PhasePoint]>> {
        self.check_time(t)?;
        if let Some(k) = self.step_of(t) {
            return Ok(Cow::Borrowed(&self.positions[k]));
        }
        let k = ((t / self.dt).floor() as usize).min(self.steps() - 1);
        let th = (t - self.time(k)) / self.dt;
        let (th2, th3) = (th * th, th * th * th);
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = (th3 - 2.0 * th2 + th) * self.dt;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = (th3 - th2) * self.dt;
        let (p0, p1) = (&self.positions[k], &self.positions[k + 1]);
        let (v0, v1) = (&self.velocities[k], &self.velocities[k + 1]);
        Ok(Cow::Owned(
            (0..self.len())
                .map(|i| p0[i] * h00 + v0[i] * h10 + p1[i] * h01 + v1[i] * h11)
                .collect(),
        ))
    }

    pub fn ensemble_at(&self, t: f64) -> Result<ParticleEnsemble> {
        let p = self.positions_at(t)?.into_owned();
        ParticleEnsemble::new(p, self.weights.clone())
    }

    /// Velocity field `F(t, z) = Σ w_j K(z - Y_j(t))` at many points.
    pub fn tracer_velocity(&self, t: f64, zs: &[PhasePoint]) -> Result<Vec<PhasePoint>> {
        let sources = self.positions_at(t)?;
        self.field_from(&sources, zs)
    }

    fn field_from(&self, sources: &[PhasePoint], zs: &[PhasePoint]) -> Result<Vec<PhasePoint>> {
        let w = &self.weights;
        zs.par_iter()
            .map(|&z| {
                let mut acc = PhasePoint::ORIGIN;
                for (y, &wj) in sources.iter().zip(w) {
                    let d = z - *y;
                    if d == PhasePoint::ORIGIN {
                        continue;
                    }
                    let k = self.kernel.pair(d).ok_or(Error::Singular {
                        x_norm: d.x.norm(),
                        v_norm: d.v.norm(),
                    })?;
                    acc += k * wj;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Transports passive points from time `t0` to `t1` (either direction) with
    /// RK4 steps no longer than `max_step`.
    pub fn transport_points(
        &self,
        zs: &[PhasePoint],
        t0: f64,
        t1: f64,
        max_step: f64,
    ) -> Result<Vec<PhasePoint>> {
        self.check_time(t0)?;
        self.check_time(t1)?;
        if !(max_step > 0.0) {
            return domain("tracer step must be positive");
        }
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(zs.to_vec());
        }
        let n = (span.abs() / max_step - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let mut y = zs.to_vec();
        for k in 0..n {
            let s = t0 + k as f64 * h;
            let s_mid = s + 0.5 * h;
            let s_end = if k + 1 == n { t1 } else { s + h };
            let k1 = self.tracer_velocity(s, &y)?;
            let k2 = self.tracer_velocity(s_mid, &axpy(&y, 0.5 * h, &k1))?;
            let k3 = self.tracer_velocity(s_mid, &axpy(&y, 0.5 * h, &k2))?;
            let k4 = self.tracer_velocity(s_end, &axpy(&y, h, &k3))?;
            for i in 0..y.len() {
                y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        Ok(y)
    }

    /// `Z_t` applied to passive points starting at time 0.
    pub fn push_forward(&self, zs: &[PhasePoint], t: f64, max_step: f64) -> Result<Vec<PhasePoint>> {
        self.transport_points(zs, 0.0, t, max_step)
    }
}

/// Preimages `Z_t^{-1}(z)` for a batch of query points.
#[derive(Clone, Debug, PartialEq)]
pub struct ReverseQuery {
    pub t: f64,
    pub queries: Vec<PhasePoint>,
    pub preimages: Vec<PhasePoint>,
    /// `|Z_t(Z_t^{-1}(z)) - z|`, once checked.
    pub residuals: Option<Vec<f64>>,
}

/// Integrates the characteristics backwards from `t` to 0; `step` defaults to the trace step.
pub fn reverse_flow(
    trace: &FlowTrace,
    t: f64,
    queries: &[PhasePoint],
    step: Option<f64>,
) -> Result<ReverseQuery> {
    let h = step.unwrap_or(trace.dt());
    let preimages = trace.transport_points(queries, t, 0.0, h)?;
    Ok(ReverseQuery {
        t,
        queries: queries.to_vec(),
        preimages,
        residuals: None,
    })
}

impl ReverseQuery {
    /// Pushes the preimages forward again and records the round-trip error.
    pub fn check_residuals(&mut self, trace: &FlowTrace, step: Option<f64>) -> Result<&[f64]> {
        let h = step.unwrap_or(trace.dt());
        let fwd = trace.push_forward(&self.preimages, self.t, h)?;
        let r = fwd
            .iter()
            .zip(&self.queries)
            .map(|(a, b)| (*a - *b).norm())
            .collect();
        self.residuals = Some(r);
        Ok(self.residuals.as_deref().unwrap_or(&[]))
    }
}

/// Whether the propagation bound uses `2c` (the default) or `c` in the growth rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagationFactor {
    One,
    Two,
}

impl PropagationFactor {
    pub fn value(self) -> f64 {
        match self {
            PropagationFactor::One => 1.0,
            PropagationFactor::Two => 2.0,
        }
    }
}

/// `(1 + k c ‖f₀‖∞^{1/4} ‖f₀‖₁^{3/4} t)^{2γ} ‖f₀‖_γ`.
pub fn gamma_propagation_bound(
    f0_linf: f64,
    f0_l1: f64,
    f0_gamma: f64,
    gamma: f64,
    t: f64,
    factor: PropagationFactor,
) -> Result<f64> {
    crate::measures::kappa(gamma)?;
    if t < 0.0 {
        return domain("propagation bound needs t >= 0");
    }
    let rate = factor.value() * fields::field_sup_bound(f0_l1, f0_linf);
    Ok((1.0 + rate * t).powf(2.0 * gamma) * f0_gamma)
}
