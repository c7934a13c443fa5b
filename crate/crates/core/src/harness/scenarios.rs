//! Scenario drivers: stability runs, ε-sweeps and norm checks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::manifest::RunManifest;
use super::plot::{line_chart, Series};
use super::report::{log_log_slope, read_norms, write_norms, write_sweep, NormRow, SweepRow};
use crate::error::{Error, Result};
use crate::fields::FieldKernel;
use crate::flow::{
    gamma_propagation_bound, integrate, read_trace, semilag_density, snapshot_steps, write_trace,
    FlowTrace, TraceFile,
};
use crate::kernel::PhasePoint;
use crate::measures::{gamma_norm, lp_norm, GridDensity, GridSpec, InitialCondition, ParticleEnsemble, Snapshot};
use crate::mollify::MollifierSpec;
use crate::transport::{
    cumulative_trapezoid, q_path_from, stability_envelope, w1_exact, CauchyConstants, Coupling,
    StabilityReport, StabilityRow, StabilityVariant,
};

/// Field kernel for scale `eps` with the configured mollifier options.
pub fn kernel_for(cfg: &ScenarioConfig, eps: f64) -> Result<FieldKernel> {
    if eps == 0.0 {
        if !cfg.experimental_unmollified {
            return Err(Error::Config("eps = 0 requires experimental_unmollified".into()));
        }
        return Ok(FieldKernel::Exact);
    }
    Ok(FieldKernel::Mollified(MollifierSpec::with_options(
        eps,
        cfg.mollifier_sharpness,
        cfg.quadrature_order,
    )?))
}

/// Initial condition and its `n_particles` samples drawn with `cfg.seed`.
pub fn sample_initial(cfg: &ScenarioConfig) -> Result<(InitialCondition, ParticleEnsemble)> {
    let ic = cfg.initial_condition()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f0 = ic.sample(cfg.n_particles, &mut rng)?;
    Ok((ic, f0))
}

/// Integrates `f0` at scale `eps` with the configured step and horizon.
pub fn integrate_at(cfg: &ScenarioConfig, f0: &ParticleEnsemble, eps: f64) -> Result<FlowTrace> {
    integrate(f0, kernel_for(cfg, eps)?, &cfg.flow_config())
}

/// Snapshots exactly as `write_trace` stores them.
pub fn snapshots_of(trace: &FlowTrace, stride: usize) -> Vec<Snapshot> {
    snapshot_steps(trace.steps(), stride)
        .into_iter()
        .map(|k| Snapshot {
            time: trace.time(k),
            eps: trace.eps(),
            ensemble: trace.ensemble_at_step(k),
        })
        .collect()
}

/// Coordinate pattern search for a local maximum of `eval`, starting at `start`
/// with step `step` per axis and stopping once every step is below `tol`.
pub fn pattern_max<F>(start: PhasePoint, step: [f64; 4], tol: f64, eval: F) -> Result<(PhasePoint, f64)>
where
    F: Fn(&[PhasePoint]) -> Result<Vec<f64>>,
{
    let mut best = start;
    let mut best_val = eval(&[start])?[0];
    let mut h = step;
    for _ in 0..200 {
        if h.iter().all(|s| *s < tol) {
            break;
        }
        let b = best.to_array();
        let mut trial = Vec::with_capacity(8);
        for axis in 0..4 {
            for sign in [-1.0, 1.0] {
                let mut c = b;
                c[axis] += sign * h[axis];
                trial.push(PhasePoint::from_array(c));
            }
        }
        let vals = eval(&trial)?;
        let (k, v) = vals
            .iter()
            .copied()
            .enumerate()
            .fold((usize::MAX, best_val), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        if k == usize::MAX {
            h.iter_mut().for_each(|s| *s *= 0.5);
        } else {
            best = trial[k];
            best_val = v;
        }
    }
    Ok((best, best_val))
}

/// `f_t(z) = f₀(Z_t^{-1}(z))` at a batch of points.
pub fn density_at(
    ic: &InitialCondition,
    trace: Option<&FlowTrace>,
    t: f64,
    zs: &[PhasePoint],
    reverse_step: f64,
) -> Result<Vec<f64>> {
    let pre = match trace {
        Some(tr) if t > 0.0 => tr.transport_points(zs, t, 0.0, reverse_step)?,
        _ => zs.to_vec(),
    };
    Ok(pre.iter().map(|p| ic.density(*p)).collect())
}

/// Sup of `f_t` refined from the largest grid cell by pattern search.
pub fn refined_sup(
    ic: &InitialCondition,
    trace: Option<&FlowTrace>,
    t: f64,
    density: &GridDensity,
    reverse_step: f64,
) -> Result<f64> {
    let grid_max = lp_norm(density, f64::INFINITY)?;
    let Some(k) = density.values().iter().position(|v| *v == grid_max) else {
        return Ok(grid_max);
    };
    let step = density.spec().step().map(|s| 0.5 * s);
    let (_, v) = pattern_max(density.spec().center(k), step, 1e-4, |zs| {
        density_at(ic, trace, t, zs, reverse_step)
    })?;
    Ok(v.max(grid_max))
}

/// Semi-Lagrangian norms at the given snapshot times. The bound column uses the
/// `t = 0` row with unit mass; `times` must start at 0.
pub fn norm_rows(
    cfg: &ScenarioConfig,
    ic: &InitialCondition,
    trace: &FlowTrace,
    times: &[f64],
    grid: &GridSpec,
) -> Result<Vec<NormRow>> {
    if times.first() != Some(&0.0) {
        return Err(Error::Domain("norm rows need t = 0 as the first time".into()));
    }
    let opts = cfg.semilag_options();
    let mut rows: Vec<NormRow> = Vec::with_capacity(times.len());
    for &t in times {
        let start = Instant::now();
        let (d, stats) = semilag_density(ic, trace, t, grid, &opts)?;
        let gn = gamma_norm(&d, cfg.gamma)?;
        let linf_refined = refined_sup(ic, Some(trace), t, &d, opts.reverse_step)?;
        let bound = match rows.first() {
            None => gn,
            Some(r0) => gamma_propagation_bound(
                r0.linf_refined,
                1.0,
                r0.gamma_norm,
                cfg.gamma,
                t,
                cfg.propagation_factor,
            )?,
        };
        rows.push(NormRow {
            t,
            l1: lp_norm(&d, 1.0)?,
            l2: lp_norm(&d, 2.0)?,
            linf: lp_norm(&d, f64::INFINITY)?,
            linf_refined,
            gamma_norm: gn,
            bound,
            truncation_mass: d.truncation_mass(),
            cells_integrated: stats.cells_integrated,
            cells_skipped: stats.cells_skipped,
        });
        log::info!(
            "norms at t = {t}: {} cells in {:.1}s",
            stats.cells_integrated,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(rows)
}

/// `‖f₀‖_γ` and the refined `‖f₀‖∞` on the configured grid.
pub fn initial_norms(cfg: &ScenarioConfig, ic: &InitialCondition) -> Result<(f64, f64)> {
    let d = GridDensity::from_fn(&cfg.grid(), |z| ic.density(z));
    let linf = refined_sup(ic, None, 0.0, &d, cfg.reverse_dt)?;
    Ok((gamma_norm(&d, cfg.gamma)?, linf))
}

/// Stability rows from persisted snapshots and norm tables alone.
///
/// `T0` is the optimal assignment between the first snapshots; `Q` is its cost
/// after transport and `W1` is re-solved at every snapshot.
pub fn stability_report_from(
    gamma: f64,
    variant: StabilityVariant,
    f_snaps: &[Snapshot],
    g_snaps: &[Snapshot],
    norms_f: &[NormRow],
    norms_g: &[NormRow],
) -> Result<StabilityReport> {
    let n = f_snaps.len();
    if g_snaps.len() != n || norms_f.len() != n || norms_g.len() != n || n == 0 {
        return Err(Error::Mismatch("snapshot and norm tables differ in length".into()));
    }
    let times: Vec<f64> = f_snaps.iter().map(|s| s.time).collect();
    for k in 0..n {
        let same = |t: f64| (t - times[k]).abs() <= 1e-12;
        if !(same(g_snaps[k].time) && same(norms_f[k].t) && same(norms_g[k].t)) {
            return Err(Error::Mismatch(format!("snapshot {k} times disagree")));
        }
    }
    let (w1_0, t0) = w1_exact(&f_snaps[0].ensemble, &g_snaps[0].ensemble)?;
    let a: Vec<&[PhasePoint]> = f_snaps.iter().map(|s| s.ensemble.points()).collect();
    let b: Vec<&[PhasePoint]> = g_snaps.iter().map(|s| s.ensemble.points()).collect();
    let q = q_path_from(&t0, &times, &a, &b)?;
    let sums: Vec<f64> = (0..n).map(|k| norms_f[k].gamma_norm + norms_g[k].gamma_norm).collect();
    let integral = cumulative_trapezoid(&times, &sums);
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        let w1 = if k == 0 {
            w1_0
        } else {
            w1_exact(&f_snaps[k].ensemble, &g_snaps[k].ensemble)?.0
        };
        rows.push(StabilityRow {
            t: times[k],
            q: q.plain[k],
            w1,
            envelope: stability_envelope(w1_0, gamma, integral[k], variant)?,
            norm_integral: integral[k],
        });
    }
    Ok(StabilityReport { gamma, variant, rows })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_with<F>(dir: &Path, name: &str, manifest: &mut RunManifest, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(dir, name)?;
    body(&mut w)?;
    w.flush()?;
    drop(w);
    manifest.add_file(dir, name)
}

fn open_trace(dir: &Path, name: &str) -> Result<TraceFile> {
    read_trace(&mut BufReader::new(File::open(dir.join(name))?))
}

fn open_norms(dir: &Path, name: &str) -> Result<Vec<NormRow>> {
    read_norms(BufReader::new(File::open(dir.join(name))?))
}

/// Runs `body`, and on failure writes a manifest with the error before returning it.
fn guarded<T>(
    dir: &Path,
    manifest: &mut RunManifest,
    body: impl FnOnce(&mut RunManifest) -> Result<T>,
) -> Result<T> {
    std::fs::create_dir_all(dir)?;
    match body(manifest) {
        Ok(v) => Ok(v),
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.write(dir)?;
            Err(e)
        }
    }
}

fn timed<T>(manifest: &mut RunManifest, key: &str, body: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let v = body()?;
    manifest
        .wall_clock_seconds
        .insert(key.to_string(), start.elapsed().as_secs_f64());
    Ok(v)
}

#[derive(Clone, Debug)]
pub struct StabilityOutcome {
    /// One report per configured shift, in order.
    pub reports: Vec<(f64, StabilityReport)>,
    pub norms_f: Vec<NormRow>,
    pub violations: usize,
    pub manifest: RunManifest,
}

/// Integrates the base and each shifted solution, then writes traces, norm tables
/// and one stability report per shift into `dir`.
///
/// Files: `config.resolved.txt`, `trace_f.txt`, `norms_f.csv` and, per shift index
/// `i`, `trace_g{i}.txt`, `norms_g{i}.csv`, `stability_{i}.csv` (plus
/// `stability_{i}.svg` with `plots = true`), then `manifest.json`.
pub fn run_stability(cfg: &ScenarioConfig, dir: &Path) -> Result<StabilityOutcome> {
    cfg.validate()?;
    let mut manifest = RunManifest::new("run-stability", &cfg.hash(), cfg.seed);
    let hash = cfg.hash();
    let out = guarded(dir, &mut manifest, |m| {
        write_with(dir, "config.resolved.txt", m, |w| Ok(w.write_all(cfg.canonical().as_bytes())?))?;
        let (ic, f0) = sample_initial(cfg)?;
        let grid = cfg.grid();
        let trace_f = timed(m, "integrate_f", || integrate_at(cfg, &f0, cfg.eps))?;
        let snaps_f = snapshots_of(&trace_f, cfg.snapshot_stride);
        let times: Vec<f64> = snaps_f.iter().map(|s| s.time).collect();
        write_with(dir, "trace_f.txt", m, |w| {
            write_trace(w, &trace_f, cfg.snapshot_stride, cfg.seed, &hash)
        })?;
        let norms_f = timed(m, "norms_f", || norm_rows(cfg, &ic, &trace_f, &times, &grid))?;
        write_with(dir, "norms_f.csv", m, |w| write_norms(w, &norms_f))?;
        drop(trace_f);

        let mut reports = Vec::new();
        let mut violations = 0;
        for (idx, &h) in cfg.shifts.iter().enumerate() {
            let shift = cfg.shift_unit() * h;
            let ic_g = ic.shifted(shift);
            let g0 = f0.translated(shift);
            let trace_g = timed(m, &format!("integrate_g{idx}"), || integrate_at(cfg, &g0, cfg.eps))?;
            let snaps_g = snapshots_of(&trace_g, cfg.snapshot_stride);
            write_with(dir, &format!("trace_g{idx}.txt"), m, |w| {
                write_trace(w, &trace_g, cfg.snapshot_stride, cfg.seed, &hash)
            })?;
            let norms_g = timed(m, &format!("norms_g{idx}"), || {
                norm_rows(cfg, &ic_g, &trace_g, &times, &grid)
            })?;
            write_with(dir, &format!("norms_g{idx}.csv"), m, |w| write_norms(w, &norms_g))?;
            drop(trace_g);
            let report = timed(m, &format!("report_{idx}"), || {
                stability_report_from(
                    cfg.gamma,
                    cfg.stability_constant,
                    &snaps_f,
                    &snaps_g,
                    &norms_f,
                    &norms_g,
                )
            })?;
            let bad = report.violations();
            for &k in &bad {
                let r = &report.rows[k];
                log::warn!(
                    "shift {h}: inequality violated at t = {} (W1 {}, Q {}, envelope {})",
                    r.t,
                    r.w1,
                    r.q,
                    r.envelope
                );
            }
            violations += bad.len();
            write_with(dir, &format!("stability_{idx}.csv"), m, |w| report.write_csv(w))?;
            if cfg.plots {
                let t: Vec<f64> = report.rows.iter().map(|r| r.t).collect();
                let q: Vec<f64> = report.rows.iter().map(|r| r.q).collect();
                let w1: Vec<f64> = report.rows.iter().map(|r| r.w1).collect();
                let env: Vec<f64> = report.rows.iter().map(|r| r.envelope).collect();
                let svg = line_chart(
                    &format!("shift {h}"),
                    "t",
                    &[
                        Series { name: "Q", xs: &t, ys: &q },
                        Series { name: "W1", xs: &t, ys: &w1 },
                        Series { name: "envelope", xs: &t, ys: &env },
                    ],
                    true,
                );
                write_with(dir, &format!("stability_{idx}.svg"), m, |w| Ok(w.write_all(svg.as_bytes())?))?;
            }
            reports.push((h, report));
        }
        Ok((reports, norms_f, violations))
    })?;
    let (reports, norms_f, violations) = out;
    manifest.violations = violations;
    manifest.status = if violations == 0 { "ok" } else { "violated" }.into();
    manifest.write(dir)?;
    Ok(StabilityOutcome {
        reports,
        norms_f,
        violations,
        manifest,
    })
}

/// Rebuilds `stability_{idx}.csv` content from the traces and norm tables in `dir`.
pub fn regenerate_stability_report(cfg: &ScenarioConfig, dir: &Path, idx: usize) -> Result<StabilityReport> {
    let f = open_trace(dir, "trace_f.txt")?;
    let g = open_trace(dir, &format!("trace_g{idx}.txt"))?;
    let nf = open_norms(dir, "norms_f.csv")?;
    let ng = open_norms(dir, &format!("norms_g{idx}.csv"))?;
    stability_report_from(cfg.gamma, cfg.stability_constant, &f.snapshots, &g.snapshots, &nf, &ng)
}

/// Summary of an ε-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub eps: Vec<f64>,
    /// `W1(f^ε_T, f^{ε/2}_T)` for each swept ε.
    pub final_w1: Vec<f64>,
    /// Least-squares slope of `ln W1` against `ln ε`.
    pub slope: Option<f64>,
    pub monotone: bool,
    pub envelope_violations: usize,
}

/// Sweep rows from snapshot pairs. `T0` is the identity, since both runs start
/// from the same particles.
pub fn sweep_rows_from(
    cfg: &ScenarioConfig,
    pairs: &[(f64, f64, &[Snapshot], &[Snapshot])],
    f0_gamma: f64,
    f0_linf: f64,
) -> Result<Vec<SweepRow>> {
    let consts = CauchyConstants::new(cfg.gamma, f0_gamma, f0_linf)?;
    let mut rows = Vec::new();
    for &(e, e2, a, b) in pairs {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::Mismatch("sweep traces have different snapshot counts".into()));
        }
        let times: Vec<f64> = a.iter().map(|s| s.time).collect();
        let t0 = Coupling::identity(a[0].ensemble.weights());
        let pa: Vec<&[PhasePoint]> = a.iter().map(|s| s.ensemble.points()).collect();
        let pb: Vec<&[PhasePoint]> = b.iter().map(|s| s.ensemble.points()).collect();
        let q = q_path_from(&t0, &times, &pa, &pb)?;
        for k in 0..a.len() {
            rows.push(SweepRow {
                eps: e,
                eps_prime: e2,
                t: times[k],
                w1: w1_exact(&a[k].ensemble, &b[k].ensemble)?.0,
                q_running_sup: q.running_sup[k],
                ln_envelope: consts.ln_envelope(e, e2, cfg.gamma, times[k]),
            });
        }
    }
    Ok(rows)
}

/// Final-time distances, slope fit, monotonicity and envelope check.
pub fn summarize_sweep(rows: &[SweepRow], t_final: f64) -> SweepSummary {
    let fin: Vec<&SweepRow> = rows.iter().filter(|r| (r.t - t_final).abs() <= 1e-12).collect();
    let eps: Vec<f64> = fin.iter().map(|r| r.eps).collect();
    let w1: Vec<f64> = fin.iter().map(|r| r.w1).collect();
    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&i, &j| eps[j].total_cmp(&eps[i]));
    let monotone = order.windows(2).all(|p| w1[p[1]] < w1[p[0]]);
    let envelope_violations = rows.iter().filter(|r| r.w1.ln() > r.ln_envelope).count();
    SweepSummary {
        slope: log_log_slope(&eps, &w1),
        eps,
        final_w1: w1,
        monotone,
        envelope_violations,
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
    pub manifest: RunManifest,
}

/// The distinct scales of a sweep: every ε and ε/2, largest first.
pub fn sweep_scales(epsilons: &[f64]) -> Vec<f64> {
    let mut s: Vec<f64> = epsilons.iter().flat_map(|&e| [e, 0.5 * e]).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.dedup();
    s
}

/// Integrates every scale from the same particles and compares each ε with ε/2.
///
/// Files: `config.resolved.txt`, `trace_eps{k}.txt` for the `k`-th scale of
/// [`sweep_scales`], `sweep.csv`, `sweep_summary.json` and `manifest.json`.
pub fn run_epsilon_sweep(cfg: &ScenarioConfig, dir: &Path) -> Result<SweepOutcome> {
    cfg.validate()?;
    if cfg.epsilons.len() < 3 {
        return Err(Error::Config("an ε-sweep needs at least three scales".into()));
    }
    let hash = cfg.hash();
    let mut manifest = RunManifest::new("sweep-epsilon", &hash, cfg.seed);
    let (rows, summary) = guarded(dir, &mut manifest, |m| {
        write_with(dir, "config.resolved.txt", m, |w| Ok(w.write_all(cfg.canonical().as_bytes())?))?;
        let (ic, f0) = sample_initial(cfg)?;
        let scales = sweep_scales(&cfg.epsilons);
        let traces = timed(m, "integrate", || {
            scales
                .par_iter()
                .map(|&e| integrate_at(cfg, &f0, e))
                .collect::<Result<Vec<_>>>()
        })?;
        let snaps: Vec<Vec<Snapshot>> = traces.iter().map(|t| snapshots_of(t, cfg.snapshot_stride)).collect();
        for (k, tr) in traces.iter().enumerate() {
            write_with(dir, &format!("trace_eps{k}.txt"), m, |w| {
                write_trace(w, tr, cfg.snapshot_stride, cfg.seed, &hash)
            })?;
        }
        drop(traces);
        let (f0_gamma, f0_linf) = initial_norms(cfg, &ic)?;
        let idx = |e: f64| scales.iter().position(|s| *s == e).expect("scale listed");
        let pairs: Vec<(f64, f64, &[Snapshot], &[Snapshot])> = cfg
            .epsilons
            .iter()
            .map(|&e| (e, 0.5 * e, &snaps[idx(e)][..], &snaps[idx(0.5 * e)][..]))
            .collect();
        let rows = timed(m, "distances", || sweep_rows_from(cfg, &pairs, f0_gamma, f0_linf))?;
        write_with(dir, "sweep.csv", m, |w| write_sweep(w, &rows))?;
        let summary = summarize_sweep(&rows, cfg.t_final);
        write_with(dir, "sweep_summary.json", m, |w| {
            Ok(serde_json::to_writer_pretty(&mut *w, &summary)?)
        })?;
        if cfg.plots {
            let svg = line_chart(
                "W1 against eps at the final time",
                "eps",
                &[Series { name: "W1", xs: &summary.eps, ys: &summary.final_w1 }],
                true,
            );
            write_with(dir, "sweep.svg", m, |w| Ok(w.write_all(svg.as_bytes())?))?;
        }
        Ok((rows, summary))
    })?;
    manifest.violations = summary.envelope_violations;
    manifest.status = if summary.envelope_violations == 0 { "ok" } else { "violated" }.into();
    manifest.write(dir)?;
    Ok(SweepOutcome {
        rows,
        summary,
        manifest,
    })
}

/// Relative drifts of `‖f_t‖_p` for `p = 1, 2, ∞` (sup taken from the refined column).
pub fn lp_drifts(rows: &[NormRow]) -> Vec<[f64; 3]> {
    let Some(r0) = rows.first() else {
        return Vec::new();
    };
    let rel = |a: f64, b: f64| if b == 0.0 { 0.0 } else { (a - b).abs() / b };
    rows.iter()
        .map(|r| {
            [
                rel(r.l1, r0.l1),
                rel(r.l2, r0.l2),
                rel(r.linf_refined, r0.linf_refined),
            ]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormCheckSummary {
    pub max_drift: [f64; 3],
    pub drift_violations: usize,
    pub gamma_violations: usize,
}

pub fn summarize_norms(rows: &[NormRow], tolerance: f64) -> NormCheckSummary {
    let drifts = lp_drifts(rows);
    let mut max_drift = [0.0f64; 3];
    for d in &drifts {
        for p in 0..3 {
            max_drift[p] = max_drift[p].max(d[p]);
        }
    }
    NormCheckSummary {
        max_drift,
        drift_violations: drifts.iter().flatten().filter(|d| **d > tolerance).count(),
        gamma_violations: rows.iter().filter(|r| r.gamma_norm > r.bound).count(),
    }
}

#[derive(Clone, Debug)]
pub struct NormOutcome {
    pub rows: Vec<NormRow>,
    pub summary: NormCheckSummary,
    pub manifest: RunManifest,
}

/// Integrates the base solution and tabulates grid norms at every snapshot.
///
/// Files: `config.resolved.txt`, `trace_f.txt`, `norms.csv`, `norms_summary.json`
/// and `manifest.json`.
pub fn run_norm_checks(cfg: &ScenarioConfig, dir: &Path) -> Result<NormOutcome> {
    cfg.validate()?;
    let hash = cfg.hash();
    let mut manifest = RunManifest::new("check-norms", &hash, cfg.seed);
    let (rows, summary) = guarded(dir, &mut manifest, |m| {
        write_with(dir, "config.resolved.txt", m, |w| Ok(w.write_all(cfg.canonical().as_bytes())?))?;
        let (ic, f0) = sample_initial(cfg)?;
        let trace = timed(m, "integrate", || integrate_at(cfg, &f0, cfg.eps))?;
        write_with(dir, "trace_f.txt", m, |w| {
            write_trace(w, &trace, cfg.snapshot_stride, cfg.seed, &hash)
        })?;
        let times: Vec<f64> = snapshot_steps(trace.steps(), cfg.snapshot_stride)
            .into_iter()
            .map(|k| trace.time(k))
            .collect();
        let rows = timed(m, "norms", || norm_rows(cfg, &ic, &trace, &times, &cfg.grid()))?;
        write_with(dir, "norms.csv", m, |w| write_norms(w, &rows))?;
        let summary = summarize_norms(&rows, cfg.lp_drift_tolerance);
        write_with(dir, "norms_summary.json", m, |w| {
            Ok(serde_json::to_writer_pretty(&mut *w, &summary)?)
        })?;
        Ok((rows, summary))
    })?;
    manifest.violations = summary.drift_violations + summary.gamma_violations;
    manifest.status = if manifest.violations == 0 { "ok" } else { "violated" }.into();
    manifest.write(dir)?;
    Ok(NormOutcome {
        rows,
        summary,
        manifest,
    })
}
