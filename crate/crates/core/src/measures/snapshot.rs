use std::io::{BufRead, Write};

use super::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::kernel::PhasePoint;

pub const SNAPSHOT_COLUMNS: &str = "weight,x1,x2,v1,v2";

/// An ensemble stamped with its time and mollification scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub eps: f64,
    pub ensemble: ParticleEnsemble,
}

/// Writes a snapshot block. Floats use shortest round-trip formatting, so reading
/// the block back reproduces every bit.
pub fn write_snapshot<W: Write>(w: &mut W, snap: &Snapshot) -> Result<()> {
    writeln!(
        w,
        "#snapshot N={} time={} eps={}",
        snap.ensemble.len(),
        snap.time,
        snap.eps
    )?;
    writeln!(w, "{SNAPSHOT_COLUMNS}")?;
    for (z, wt) in snap.ensemble.iter() {
        writeln!(w, "{},{},{},{},{}", wt, z.x.0, z.x.1, z.v.0, z.v.1)?;
    }
    Ok(())
}

pub(crate) fn header_fields(line: &str, tag: &str) -> Result<Vec<(String, String)>> {
    let rest = line
        .trim()
        .strip_prefix(tag)
        .ok_or_else(|| Error::Parse(format!("expected `{tag}` header, found `{line}`")))?;
    rest.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse(format!("malformed header token `{tok}`")))
        })
        .collect()
}

pub(crate) fn field<T: std::str::FromStr>(fields: &[(String, String)], key: &str) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v)
        .ok_or_else(|| Error::Parse(format!("header is missing `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::Parse(format!("cannot parse `{key}={raw}`")))
}

fn next_line<R: BufRead>(r: &mut R, buf: &mut String) -> Result<bool> {
    loop {
        buf.clear();
        if r.read_line(buf)? == 0 {
            return Ok(false);
        }
        if !buf.trim().is_empty() {
            return Ok(true);
        }
    }
}

/// Reads the next snapshot block, or `None` at end of input.
pub fn read_snapshot<R: BufRead>(r: &mut R) -> Result<Option<Snapshot>> {
    let mut line = String::new();
    if !next_line(r, &mut line)? {
        return Ok(None);
    }
    let fields = header_fields(&line, "#snapshot")?;
    let n: usize = field(&fields, "N")?;
    let time: f64 = field(&fields, "time")?;
    let eps: f64 = field(&fields, "eps")?;
    if !next_line(r, &mut line)? || line.trim() != SNAPSHOT_COLUMNS {
        return Err(Error::Parse(format!("expected column line `{SNAPSHOT_COLUMNS}`")));
    }
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        if !next_line(r, &mut line)? {
            return Err(Error::Parse(format!("snapshot truncated after {i} of {n} records")));
        }
        let vals: Vec<f64> = line
            .trim()
            .split(',')
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("record {i}: {e}")))?;
        if vals.len() != 5 {
            return Err(Error::Parse(format!("record {i} has {} fields", vals.len())));
        }
        weights.push(vals[0]);
        points.push(PhasePoint::new(vals[1], vals[2], vals[3], vals[4]));
    }
    Ok(Some(Snapshot {
        time,
        eps,
        ensemble: ParticleEnsemble::new(points, weights)?,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let pts = vec![
            PhasePoint::new(0.1, -1.0 / 3.0, 2e-300, 1.0e10),
            PhasePoint::new(std::f64::consts::PI, 0.0, -0.0, 7.0),
        ];
        let snap = Snapshot {
            time: 0.1 + 0.2,
            eps: 0.05,
            ensemble: ParticleEnsemble::uniform(pts).unwrap(),
        };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &snap).unwrap();
        let back = read_snapshot(&mut buf.as_slice()).unwrap().unwrap();
        assert_eq!(back.time.to_bits(), snap.time.to_bits());
        for (a, b) in back.ensemble.points().iter().zip(snap.ensemble.points()) {
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_input_errors() {
        let text = "#snapshot N=2 time=0 eps=0.1\nweight,x1,x2,v1,v2\n0.5,0,0,0,0\n";
        assert!(read_snapshot(&mut text.as_bytes()).is_err());
    }
}
