//! Wasserstein-1 distance, couplings transported by the flow, and stability envelopes.

mod assignment;

use std::f64::consts::SQRT_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fields::sup_bound_constant;
use crate::flow::FlowTrace;
use crate::kernel::PhasePoint;
use crate::measures::{kappa, ParticleEnsemble};

pub use assignment::solve as solve_assignment;

/// Largest particle count accepted by the exact solver.
pub const MAX_EXACT_PARTICLES: usize = 1024;

/// A coupling between two equal-size uniform ensembles: source `i` is matched to
/// target `pairing[i]` with mass `weights[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub pairing: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Coupling {
    pub fn identity(weights: &[f64]) -> Self {
        Self {
            pairing: (0..weights.len()).collect(),
            weights: weights.to_vec(),
        }
    }

    /// Checks that the pairing is a permutation whose marginals are `mu` and `nu`.
    pub fn validate(&self, mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Result<()> {
        let n = self.pairing.len();
        if n != mu.len() || n != nu.len() || self.weights.len() != n {
            return Err(Error::Mismatch("coupling size differs from the marginals".into()));
        }
        let mut seen = vec![false; n];
        for (i, &j) in self.pairing.iter().enumerate() {
            if j >= n || seen[j] {
                return Err(Error::Mismatch("pairing is not a permutation".into()));
            }
            seen[j] = true;
            let w = self.weights[i];
            if (w - mu.weights()[i]).abs() > 1e-15 || (w - nu.weights()[j]).abs() > 1e-15 {
                return Err(Error::Mismatch(format!("marginal mismatch at source {i}")));
            }
        }
        Ok(())
    }

    /// `Σ w_i |a_i - b_{σ(i)}|`.
    pub fn cost(&self, a: &[PhasePoint], b: &[PhasePoint]) -> f64 {
        self.pairing
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(i, (&j, &w))| w * (a[i] - b[j]).norm())
            .sum()
    }
}

fn check_couplable(mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::Mismatch(format!(
            "particle counts differ: {} vs {}",
            mu.len(),
            nu.len()
        )));
    }
    if !mu.has_uniform_weights() || !nu.has_uniform_weights() {
        return Err(Error::Mismatch("exact W1 needs uniform weights".into()));
    }
    if mu.len() > MAX_EXACT_PARTICLES {
        return Err(Error::Mismatch(format!(
            "exact W1 is limited to {MAX_EXACT_PARTICLES} particles, got {}",
            mu.len()
        )));
    }
    Ok(())
}

/// Exact `W1(μ, ν)` between equal-size uniform ensembles and an optimal coupling.
pub fn w1_exact(mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Result<(f64, Coupling)> {
    check_couplable(mu, nu)?;
    let n = mu.len();
    let (a, b) = (mu.points(), nu.points());
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = (a[i] - b[j]).norm();
        }
    }
    let (col, _) = solve_assignment(&cost, n);
    let coupling = Coupling {
        pairing: col,
        weights: mu.weights().to_vec(),
    };
    let value = coupling.cost(a, b);
    Ok((value, coupling))
}

/// Pushes `t0` forward by both flows and returns the transported coupling with its cost at `t`.
pub fn compose_transport(
    t0: &Coupling,
    trace_f: &FlowTrace,
    trace_g: &FlowTrace,
    t: f64,
) -> Result<(Coupling, f64)> {
    if t0.pairing.len() != trace_f.len() || t0.pairing.len() != trace_g.len() {
        return Err(Error::Mismatch("coupling and traces have different sizes".into()));
    }
    let a = trace_f.positions_at(t)?;
    let b = trace_g.positions_at(t)?;
    Ok((t0.clone(), t0.cost(&a, &b)))
}

/// `Q(t) = ∫ |Z^f_t(z) - Z^g_t(z')| dπ₀` along a sequence of times, with its running-sup form
/// `Σ w_i max_{s <= t} |...|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QPath {
    pub times: Vec<f64>,
    pub plain: Vec<f64>,
    pub running_sup: Vec<f64>,
}

/// Q path over explicit position sets.
pub fn q_path_from(
    t0: &Coupling,
    times: &[f64],
    f_positions: &[&[PhasePoint]],
    g_positions: &[&[PhasePoint]],
) -> Result<QPath> {
    if f_positions.len() != times.len() || g_positions.len() != times.len() {
        return Err(Error::Mismatch("times and position sets differ in length".into()));
    }
    let n = t0.pairing.len();
    let mut sup = vec![0.0f64; n];
    let mut plain = Vec::with_capacity(times.len());
    let mut running = Vec::with_capacity(times.len());
    for (a, b) in f_positions.iter().zip(g_positions) {
        if a.len() != n || b.len() != n {
            return Err(Error::Mismatch("position set size differs from the coupling".into()));
        }
        let mut q = 0.0;
        let mut r = 0.0;
        for i in 0..n {
            let d = (a[i] - b[t0.pairing[i]]).norm();
            sup[i] = sup[i].max(d);
            q += t0.weights[i] * d;
            r += t0.weights[i] * sup[i];
        }
        plain.push(q);
        running.push(r);
    }
    Ok(QPath {
        times: times.to_vec(),
        plain,
        running_sup: running,
    })
}

/// Q path over every stored step of two traces with a common step.
pub fn transport_cost_q(t0: &Coupling, trace_f: &FlowTrace, trace_g: &FlowTrace) -> Result<QPath> {
    if trace_f.steps() != trace_g.steps() || trace_f.dt() != trace_g.dt() {
        return Err(Error::Mismatch("traces use different time grids".into()));
    }
    let times: Vec<f64> = (0..=trace_f.steps()).map(|k| trace_f.time(k)).collect();
    let a: Vec<&[PhasePoint]> = (0..times.len()).map(|k| trace_f.positions_at_step(k)).collect();
    let b: Vec<&[PhasePoint]> = (0..times.len()).map(|k| trace_g.positions_at_step(k)).collect();
    q_path_from(t0, &times, &a, &b)
}

/// Constant in the stability exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityVariant {
    /// `6 κ_γ`.
    Six,
    /// `6√2 κ_γ`, the larger of the two and the default.
    SixSqrt2,
}

impl StabilityVariant {
    pub fn factor(self) -> f64 {
        match self {
            StabilityVariant::Six => 6.0,
            StabilityVariant::SixSqrt2 => 6.0 * SQRT_2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StabilityVariant::Six => "6",
            StabilityVariant::SixSqrt2 => "6sqrt2",
        }
    }
}

/// `W1(f₀, g₀) exp(k κ_γ ∫₀ᵗ (‖f_s‖_γ + ‖g_s‖_γ) ds)`.
pub fn stability_envelope(
    w1_0: f64,
    gamma: f64,
    norm_integral: f64,
    variant: StabilityVariant,
) -> Result<f64> {
    let k = kappa(gamma)?;
    if w1_0 < 0.0 || norm_integral < 0.0 {
        return domain("stability envelope needs non-negative inputs");
    }
    Ok(w1_0 * (variant.factor() * k * norm_integral).exp())
}

/// `3√2 κ_γ`, the constant of the field-difference estimate.
pub fn key_estimate_constant(gamma: f64) -> Result<f64> {
    Ok(3.0 * SQRT_2 * kappa(gamma)?)
}

/// Constants of the ε-Cauchy estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyConstants {
    /// `α = c ‖f₀‖∞^{1/4}`.
    pub alpha: f64,
    /// `C_γ = 12 · 2^{2γ} π κ_γ ‖f₀‖_γ`.
    pub c_gamma: f64,
    /// `C'_γ = C_γ / (2γα)`.
    pub c_prime: f64,
}

impl CauchyConstants {
    pub fn new(gamma: f64, f0_gamma: f64, f0_linf: f64) -> Result<Self> {
        let k = kappa(gamma)?;
        if !(f0_linf > 0.0 && f0_gamma >= 0.0) {
            return domain("Cauchy constants need ‖f₀‖∞ > 0 and ‖f₀‖_γ >= 0");
        }
        let alpha = sup_bound_constant() * f0_linf.powf(0.25);
        let c_gamma = 12.0 * 2f64.powf(2.0 * gamma) * std::f64::consts::PI * k * f0_gamma;
        Ok(Self {
            alpha,
            c_gamma,
            c_prime: c_gamma / (2.0 * gamma * alpha),
        })
    }

    /// Natural log of the envelope, finite even when the envelope overflows.
    pub fn ln_envelope(&self, eps: f64, eps_prime: f64, gamma: f64, t: f64) -> f64 {
        (eps + eps_prime).ln() + self.c_prime * (1.0 + self.alpha * t).powf(2.0 * gamma + 1.0)
    }
}

/// `(ε + ε') exp(C'_γ (1 + αt)^{2γ+1})`; may be `+∞` in floating point.
pub fn cauchy_envelope(
    eps: f64,
    eps_prime: f64,
    gamma: f64,
    f0_gamma: f64,
    f0_linf: f64,
    t: f64,
) -> Result<f64> {
    if !(eps > 0.0 && eps_prime > 0.0) || t < 0.0 {
        return domain("Cauchy envelope needs positive scales and t >= 0");
    }
    let c = CauchyConstants::new(gamma, f0_gamma, f0_linf)?;
    Ok(c.ln_envelope(eps, eps_prime, gamma, t).exp())
}

/// Trapezoid integral of `values` over `times`, cumulative.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub t: f64,
    pub q: f64,
    pub w1: f64,
    pub envelope: f64,
    pub norm_integral: f64,
}

/// Time series of `Q`, `W1` and the stability envelope for one pair of solutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub gamma: f64,
    pub variant: StabilityVariant,
    pub rows: Vec<StabilityRow>,
}

impl StabilityReport {
    pub const HEADER: &'static str = "t,Q,W1,envelope,norm_integral";

    /// Rows where `W1 <= Q` or `Q <= envelope` fails (relative slack `1e-12`).
    pub fn violations(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.w1 > r.q * (1.0 + 1e-12) || r.q > r.envelope * (1.0 + 1e-12))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.t, r.q, r.w1, r.envelope, r.norm_integral)?;
        }
        Ok(())
    }
}
