//! Flat `key = value` scenario configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is optional and
//! unknown keys are rejected. Lists are comma separated.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `initial` | `two_bump` | `gaussian`, `polynomial`, `uniform` or `two_bump` |
//! | `center` | `1, 0, 0.5, 0` | Gaussian centre `(x1, x2, v1, v2)` |
//! | `sigma_x`, `sigma_v` | `0.5` | Gaussian widths |
//! | `truncation` | `4` | Gaussian cut-off in standard deviations |
//! | `exponent` | `4` | decay exponent of `polynomial` |
//! | `half_width` | `1` | box half-width of `uniform` |
//! | `shifts` | `0.01, 0.05` | rigid perturbation sizes for stability runs |
//! | `shift_direction` | `1, 0, 0, 0` | perturbation direction (normalised) |
//! | `gamma` | `3` | weight exponent, > 2 |
//! | `eps` | `0.1` | mollification scale for stability and norm runs |
//! | `epsilons` | `0.4, 0.2, 0.1, 0.05` | sweep scales; each is paired with half of itself |
//! | `n_particles` | `1000` | ensemble size |
//! | `t_final`, `dt` | `1`, `0.005` | horizon and RK4 step |
//! | `snapshot_stride` | `50` | steps between snapshots |
//! | `grid_half_width` | `4` | one value or four per-axis values |
//! | `grid_n` | `32` | one value or four per-axis counts |
//! | `reverse_dt` | `0.05` | largest step of the semi-Lagrangian reverse flow |
//! | `skip_support` | `true` | skip grid cells provably outside the support |
//! | `seed` | `42` | sampling seed |
//! | `stability_constant` | `6sqrt2` | `6` or `6sqrt2` |
//! | `propagation_factor` | `2` | `1` or `2` |
//! | `mollifier_sharpness` | `1` | `k` in `exp(-k / (1 - |y|²))` |
//! | `quadrature_order` | `32` | Gauss-Legendre order for quadrature kernels |
//! | `max_step_displacement` | 10 grid cells | step guard |
//! | `experimental_unmollified` | `false` | allow `eps = 0` dynamics |
//! | `lp_drift_tolerance` | `0.01` | relative drift allowed by `check-norms` |
//! | `plots` | `false` | also write SVG charts |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flow::{FlowConfig, PropagationFactor, SemilagOptions};
use crate::kernel::PhasePoint;
use crate::measures::{GridSpec, InitialCondition, InitialKind, TruncatedGaussian};
use crate::transport::StabilityVariant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub initial: String,
    pub center: [f64; 4],
    pub sigma_x: f64,
    pub sigma_v: f64,
    pub truncation: f64,
    pub exponent: f64,
    pub half_width: f64,
    pub shifts: Vec<f64>,
    pub shift_direction: [f64; 4],
    pub gamma: f64,
    pub eps: f64,
    pub epsilons: Vec<f64>,
    pub n_particles: usize,
    pub t_final: f64,
    pub dt: f64,
    pub snapshot_stride: usize,
    pub grid_half_width: [f64; 4],
    pub grid_n: [usize; 4],
    pub reverse_dt: f64,
    pub skip_support: bool,
    pub seed: u64,
    pub stability_constant: StabilityVariant,
    pub propagation_factor: PropagationFactor,
    pub mollifier_sharpness: f64,
    pub quadrature_order: usize,
    pub max_step_displacement: Option<f64>,
    pub experimental_unmollified: bool,
    pub lp_drift_tolerance: f64,
    pub plots: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            initial: "two_bump".into(),
            center: [1.0, 0.0, 0.5, 0.0],
            sigma_x: 0.5,
            sigma_v: 0.5,
            truncation: 4.0,
            exponent: 4.0,
            half_width: 1.0,
            shifts: vec![0.01, 0.05],
            shift_direction: [1.0, 0.0, 0.0, 0.0],
            gamma: 3.0,
            eps: 0.1,
            epsilons: vec![0.4, 0.2, 0.1, 0.05],
            n_particles: 1000,
            t_final: 1.0,
            dt: 0.005,
            snapshot_stride: 50,
            grid_half_width: [4.0; 4],
            grid_n: [32; 4],
            reverse_dt: 0.05,
            skip_support: true,
            seed: 42,
            stability_constant: StabilityVariant::SixSqrt2,
            propagation_factor: PropagationFactor::Two,
            mollifier_sharpness: 1.0,
            quadrature_order: 32,
            max_step_displacement: None,
            experimental_unmollified: false,
            lp_drift_tolerance: 0.01,
            plots: false,
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> Error {
    Error::Config(format!("`{key} = {value}`: {why}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim().parse().map_err(|_| bad(key, v, "expected a number"))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|t| parse_f64(key, t)).collect()
}

fn parse_four(key: &str, v: &str) -> Result<[f64; 4]> {
    let l = parse_list(key, v)?;
    match l.len() {
        1 => Ok([l[0]; 4]),
        4 => Ok([l[0], l[1], l[2], l[3]]),
        _ => Err(bad(key, v, "expected one or four values")),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim().parse().map_err(|_| bad(key, v, "expected a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "expected true or false")),
    }
}

fn fmt_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses `key = value` lines on top of the defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if seen.insert(k.to_string(), lineno).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", lineno + 1)));
            }
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "initial" => self.initial = v.to_string(),
            "center" => self.center = parse_four(k, v)?,
            "sigma_x" => self.sigma_x = parse_f64(k, v)?,
            "sigma_v" => self.sigma_v = parse_f64(k, v)?,
            "truncation" => self.truncation = parse_f64(k, v)?,
            "exponent" => self.exponent = parse_f64(k, v)?,
            "half_width" => self.half_width = parse_f64(k, v)?,
            "shifts" => self.shifts = parse_list(k, v)?,
            "shift_direction" => self.shift_direction = parse_four(k, v)?,
            "gamma" => self.gamma = parse_f64(k, v)?,
            "eps" => self.eps = parse_f64(k, v)?,
            "epsilons" => self.epsilons = parse_list(k, v)?,
            "n_particles" => self.n_particles = parse_usize(k, v)?,
            "t_final" => self.t_final = parse_f64(k, v)?,
            "dt" => self.dt = parse_f64(k, v)?,
            "snapshot_stride" => self.snapshot_stride = parse_usize(k, v)?,
            "grid_half_width" => self.grid_half_width = parse_four(k, v)?,
            "grid_n" => {
                let l: Vec<usize> = v.split(',').map(|t| parse_usize(k, t)).collect::<Result<_>>()?;
                self.grid_n = match l.len() {
                    1 => [l[0]; 4],
                    4 => [l[0], l[1], l[2], l[3]],
                    _ => return Err(bad(k, v, "expected one or four values")),
                };
            }
            "reverse_dt" => self.reverse_dt = parse_f64(k, v)?,
            "skip_support" => self.skip_support = parse_bool(k, v)?,
            "seed" => self.seed = v.parse().map_err(|_| bad(k, v, "expected an unsigned integer"))?,
            "stability_constant" => {
                self.stability_constant = match v {
                    "6" => StabilityVariant::Six,
                    "6sqrt2" => StabilityVariant::SixSqrt2,
                    _ => return Err(bad(k, v, "expected 6 or 6sqrt2")),
                }
            }
            "propagation_factor" => {
                self.propagation_factor = match v {
                    "1" => PropagationFactor::One,
                    "2" => PropagationFactor::Two,
                    _ => return Err(bad(k, v, "expected 1 or 2")),
                }
            }
            "mollifier_sharpness" => self.mollifier_sharpness = parse_f64(k, v)?,
            "quadrature_order" => self.quadrature_order = parse_usize(k, v)?,
            "max_step_displacement" => self.max_step_displacement = Some(parse_f64(k, v)?),
            "experimental_unmollified" => self.experimental_unmollified = parse_bool(k, v)?,
            "lp_drift_tolerance" => self.lp_drift_tolerance = parse_f64(k, v)?,
            "plots" => self.plots = parse_bool(k, v)?,
            _ => return Err(Error::Config(format!("unknown key `{k}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.gamma > 2.0 && self.gamma.is_finite()) {
            return err(format!("gamma must exceed 2, got {}", self.gamma));
        }
        let eps_ok = |e: f64| e > 0.0 && e <= 1.0;
        if !(eps_ok(self.eps) || (self.eps == 0.0 && self.experimental_unmollified)) {
            return err(format!("eps must lie in (0, 1], got {}", self.eps));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !eps_ok(**e)) {
            return err(format!("sweep scales must lie in (0, 1], got {e}"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return err(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return err(format!("t_final must be non-negative, got {}", self.t_final));
        }
        if self.n_particles < 1 {
            return err("n_particles must be at least 1".into());
        }
        if self.snapshot_stride < 1 {
            return err("snapshot_stride must be at least 1".into());
        }
        if !(self.reverse_dt > 0.0) {
            return err("reverse_dt must be positive".into());
        }
        if self.shifts.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return err("shifts must be non-negative".into());
        }
        if self.shift_direction.iter().all(|c| *c == 0.0) {
            return err("shift_direction must be nonzero".into());
        }
        if self.lp_drift_tolerance <= 0.0 {
            return err("lp_drift_tolerance must be positive".into());
        }
        GridSpec::new(self.grid_half_width, self.grid_n).map_err(|e| Error::Config(e.to_string()))?;
        self.initial_condition()?.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.flow_config().steps_checked()?;
        Ok(())
    }

    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let gauss = TruncatedGaussian {
            center: PhasePoint::from_array(self.center),
            sigma_x: self.sigma_x,
            sigma_v: self.sigma_v,
            truncation: self.truncation,
        };
        let kind = match self.initial.as_str() {
            "gaussian" => InitialKind::Gaussian(gauss),
            "two_bump" => InitialKind::TwoBump(gauss),
            "polynomial" => InitialKind::Polynomial {
                exponent: self.exponent,
            },
            "uniform" => InitialKind::Uniform {
                half_width: self.half_width,
            },
            other => return Err(Error::Config(format!("unknown initial condition `{other}`"))),
        };
        InitialCondition::new(kind).map_err(|e| Error::Config(e.to_string()))
    }

    /// Unit vector along `shift_direction`.
    pub fn shift_unit(&self) -> PhasePoint {
        let d = PhasePoint::from_array(self.shift_direction);
        d * (1.0 / d.norm())
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.grid_half_width, self.grid_n).expect("validated grid")
    }

    pub fn flow_config(&self) -> FlowConfig {
        let h = self.grid().step().iter().copied().fold(f64::INFINITY, f64::min);
        FlowConfig {
            dt: self.dt,
            t_final: self.t_final,
            max_step_displacement: self.max_step_displacement.unwrap_or(10.0 * h),
            allow_unmollified: self.experimental_unmollified,
        }
    }

    pub fn semilag_options(&self) -> SemilagOptions {
        SemilagOptions {
            reverse_step: self.reverse_dt,
            skip_support: self.skip_support,
            margin_factor: 1.0,
        }
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("initial", self.initial.clone());
        put("center", fmt_list(&self.center));
        put("sigma_x", self.sigma_x.to_string());
        put("sigma_v", self.sigma_v.to_string());
        put("truncation", self.truncation.to_string());
        put("exponent", self.exponent.to_string());
        put("half_width", self.half_width.to_string());
        put("shifts", fmt_list(&self.shifts));
        put("shift_direction", fmt_list(&self.shift_direction));
        put("gamma", self.gamma.to_string());
        put("eps", self.eps.to_string());
        put("epsilons", fmt_list(&self.epsilons));
        put("n_particles", self.n_particles.to_string());
        put("t_final", self.t_final.to_string());
        put("dt", self.dt.to_string());
        put("snapshot_stride", self.snapshot_stride.to_string());
        put("grid_half_width", fmt_list(&self.grid_half_width));
        put("grid_n", fmt_list(&self.grid_n));
        put("reverse_dt", self.reverse_dt.to_string());
        put("skip_support", self.skip_support.to_string());
        put("seed", self.seed.to_string());
        put("stability_constant", self.stability_constant.label().to_string());
        put(
            "propagation_factor",
            match self.propagation_factor {
                PropagationFactor::One => "1".into(),
                PropagationFactor::Two => "2".into(),
            },
        );
        put("mollifier_sharpness", self.mollifier_sharpness.to_string());
        put("quadrature_order", self.quadrature_order.to_string());
        put(
            "max_step_displacement",
            self.flow_config().max_step_displacement.to_string(),
        );
        put("experimental_unmollified", self.experimental_unmollified.to_string());
        put("lp_drift_tolerance", self.lp_drift_tolerance.to_string());
        put("plots", self.plots.to_string());
        s
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl FlowConfig {
    fn steps_checked(&self) -> Result<()> {
        let k = (self.t_final / self.dt).round();
        if (k * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(1.0) {
            return Err(Error::Config(format!(
                "t_final = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ScenarioConfig::default();
        c.validate().unwrap();
        assert_eq!(c.flow_config().max_step_displacement, 2.5);
    }

    #[test]
    fn canonical_round_trip() {
        let c = ScenarioConfig::parse("gamma = 4\nepsilons = 0.3, 0.15, 0.075\ngrid_n = 9, 9, 11, 11\n").unwrap();
        let back = ScenarioConfig::parse(&c.canonical()).unwrap();
        assert_eq!(back.canonical(), c.canonical());
        assert_eq!(back.hash(), c.hash());
        assert_ne!(c.hash(), ScenarioConfig::default().hash());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(ScenarioConfig::parse("gama = 3").is_err());
        assert!(ScenarioConfig::parse("gamma = 2").is_err());
        assert!(ScenarioConfig::parse("eps = 1.5").is_err());
        assert!(ScenarioConfig::parse("dt = 0.3").is_err());
        assert!(ScenarioConfig::parse("initial = cauchy").is_err());
        assert!(ScenarioConfig::parse("gamma = 3\ngamma = 4").is_err());
        assert!(ScenarioConfig::parse("just text").is_err());
    }
}
