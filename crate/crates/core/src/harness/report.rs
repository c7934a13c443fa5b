//! CSV rows written by the scenarios and read back for regeneration.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms of the semi-Lagrangian density at one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRow {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// Local maximisation of `f₀ ∘ Z_t^{-1}` started from the best cell.
    pub linf_refined: f64,
    pub gamma_norm: f64,
    pub bound: f64,
    pub truncation_mass: f64,
    pub cells_integrated: usize,
    pub cells_skipped: usize,
}

impl NormRow {
    pub const HEADER: &'static str =
        "t,l1,l2,linf,linf_refined,gamma_norm,bound,truncation_mass,cells_integrated,cells_skipped";
}

pub fn write_norms<W: Write>(w: &mut W, rows: &[NormRow]) -> Result<()> {
    writeln!(w, "{}", NormRow::HEADER)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.l1,
            r.l2,
            r.linf,
            r.linf_refined,
            r.gamma_norm,
            r.bound,
            r.truncation_mass,
            r.cells_integrated,
            r.cells_skipped
        )?;
    }
    Ok(())
}

fn parse_row(line: &str, width: usize) -> Result<Vec<String>> {
    let cols: Vec<String> = line.trim().split(',').map(|c| c.to_string()).collect();
    if cols.len() != width {
        return Err(Error::Parse(format!("expected {width} columns in `{line}`")));
    }
    Ok(cols)
}

fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

pub fn read_norms<R: BufRead>(r: R) -> Result<Vec<NormRow>> {
    let mut lines = r.lines();
    let head = lines.next().transpose()?.unwrap_or_default();
    if head.trim() != NormRow::HEADER {
        return Err(Error::Parse(format!("unexpected norms header `{head}`")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c = parse_row(&line, 10)?;
        out.push(NormRow {
            t: num(&c[0])?,
            l1: num(&c[1])?,
            l2: num(&c[2])?,
            linf: num(&c[3])?,
            linf_refined: num(&c[4])?,
            gamma_norm: num(&c[5])?,
            bound: num(&c[6])?,
            truncation_mass: num(&c[7])?,
            cells_integrated: num(&c[8])?,
            cells_skipped: num(&c[9])?,
        });
    }
    Ok(out)
}

/// One `(ε, ε')` comparison at one snapshot time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub eps_prime: f64,
    pub t: f64,
    pub w1: f64,
    pub q_running_sup: f64,
    pub ln_envelope: f64,
}

impl SweepRow {
    pub const HEADER: &'static str = "eps,eps_prime,t,W1,Q_running_sup,ln_envelope";
}

pub fn write_sweep<W: Write>(w: &mut W, rows: &[SweepRow]) -> Result<()> {
    writeln!(w, "{}", SweepRow::HEADER)?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.eps, r.eps_prime, r.t, r.w1, r.q_running_sup, r.ln_envelope
        )?;
    }
    Ok(())
}

pub fn read_sweep<R: BufRead>(r: R) -> Result<Vec<SweepRow>> {
    let mut lines = r.lines();
    let head = lines.next().transpose()?.unwrap_or_default();
    if head.trim() != SweepRow::HEADER {
        return Err(Error::Parse(format!("unexpected sweep header `{head}`")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c = parse_row(&line, 6)?;
        out.push(SweepRow {
            eps: num(&c[0])?,
            eps_prime: num(&c[1])?,
            t: num(&c[2])?,
            w1: num(&c[3])?,
            q_running_sup: num(&c[4])?,
            ln_envelope: num(&c[5])?,
        });
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.3)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 1.3).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn norms_round_trip() {
        let rows = vec![NormRow {
            t: 0.25,
            l1: 0.999_999_1,
            l2: 0.3,
            linf: 0.2,
            linf_refined: 0.21,
            gamma_norm: 5.0 / 3.0,
            bound: 12.0,
            truncation_mass: -1e-9,
            cells_integrated: 10,
            cells_skipped: 3,
        }];
        let mut buf = Vec::new();
        write_norms(&mut buf, &rows).unwrap();
        assert_eq!(read_norms(buf.as_slice()).unwrap(), rows);
    }
}
