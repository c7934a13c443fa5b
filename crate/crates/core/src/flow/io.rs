use std::io::{BufRead, Write};

use super::FlowTrace;
use crate::error::{Error, Result};
use crate::measures::snapshot::{field, header_fields};
use crate::measures::{read_snapshot, write_snapshot, Snapshot};

/// Metadata line of a trace file.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceHeader {
    pub n: usize,
    pub eps: f64,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub snapshots: Vec<Snapshot>,
}

impl TraceFile {
    /// Snapshot whose time matches `t` to within `1e-12`.
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.time - t).abs() <= 1e-12)
    }
}

/// Steps written for a given stride: every `stride`-th step plus the last one.
pub fn snapshot_steps(steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut out: Vec<usize> = (0..=steps).step_by(stride).collect();
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

pub fn write_trace<W: Write>(
    w: &mut W,
    trace: &FlowTrace,
    stride: usize,
    seed: u64,
    config_hash: &str,
) -> Result<()> {
    writeln!(
        w,
        "#trace N={} eps={} dt={} T={} seed={} config_hash={}",
        trace.len(),
        trace.eps(),
        trace.dt(),
        trace.t_final(),
        seed,
        config_hash
    )?;
    for k in snapshot_steps(trace.steps(), stride) {
        write_snapshot(
            w,
            &Snapshot {
                time: trace.time(k),
                eps: trace.eps(),
                ensemble: trace.ensemble_at_step(k),
            },
        )?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: &mut R) -> Result<TraceFile> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Parse("empty trace file".into()));
    }
    let f = header_fields(&line, "#trace")?;
    let header = TraceHeader {
        n: field(&f, "N")?,
        eps: field(&f, "eps")?,
        dt: field(&f, "dt")?,
        t_final: field(&f, "T")?,
        seed: field(&f, "seed")?,
        config_hash: field(&f, "config_hash")?,
    };
    let mut snapshots = Vec::new();
    while let Some(s) = read_snapshot(r)? {
        if s.ensemble.len() != header.n {
            return Err(Error::Parse(format!(
                "snapshot at t = {} has {} particles, header says {}",
                s.time,
                s.ensemble.len(),
                header.n
            )));
        }
        snapshots.push(s);
    }
    Ok(TraceFile { header, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldKernel;
    use crate::flow::{integrate, FlowConfig};
    use crate::kernel::PhasePoint;
    use crate::measures::ParticleEnsemble;

    #[test]
    fn stride_includes_endpoints() {
        assert_eq!(snapshot_steps(10, 4), vec![0, 4, 8, 10]);
        assert_eq!(snapshot_steps(8, 4), vec![0, 4, 8]);
    }

    #[test]
    fn trace_round_trip() {
        let f = ParticleEnsemble::uniform(vec![
            PhasePoint::new(0.3, 0.0, 0.1, 0.0),
            PhasePoint::new(-0.2, 0.1, 0.0, 0.3),
        ])
        .unwrap();
        let tr = integrate(&f, FieldKernel::mollified(0.2).unwrap(), &FlowConfig::new(0.1, 0.3)).unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &tr, 2, 7, "abc").unwrap();
        let back = read_trace(&mut buf.as_slice()).unwrap();
        assert_eq!(back.header.seed, 7);
        assert_eq!(back.snapshots.len(), 3);
        assert_eq!(back.at(0.3).unwrap().ensemble, tr.ensemble_at_step(3));
    }
}
