//! Bitwise-exact optimizer-state snapshots.
//!
//! Line-oriented text format, one record per file:
//!
//! ```text
//! fopt-state v1
//! variant fadam
//! t 37
//! m 3fb999999999999a bfc5555555555555 ...
//! full 3ff0000000000000 ...
//! ```
//!
//! Factored states replace the `full` line with a `row` line and a `col`
//! line. Every f64 is serialized as the 16-hex-digit big-endian bit
//! pattern (`f64::to_bits`), so restore is exact for every value including
//! signed zeros and subnormals, and a resumed run replays bit for bit.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

use super::{OptimizerState, SecondMoment, Variant};

const MAGIC: &str = "fopt-state v1";

fn write_f64_line(w: &mut impl Write, tag: &str, values: &[f64]) -> std::io::Result<()> {
    write!(w, "{tag}")?;
    for v in values {
        write!(w, " {:016x}", v.to_bits())?;
    }
    writeln!(w)
}

/// Serialize `(variant, state)` into `w`.
pub fn write_state(w: &mut impl Write, variant: Variant, state: &OptimizerState) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "variant {variant}")?;
    writeln!(w, "t {}", state.t)?;
    write_f64_line(w, "m", &state.m)?;
    match &state.second {
        SecondMoment::Full(f) => write_f64_line(w, "full", f)?,
        SecondMoment::Factored { row, col } => {
            write_f64_line(w, "row", row)?;
            write_f64_line(w, "col", col)?;
        }
    }
    Ok(())
}

fn parse_f64_values(line_no: usize, rest: &str) -> Result<Vec<f64>> {
    rest.split_whitespace()
        .map(|tok| {
            u64::from_str_radix(tok, 16)
                .map(f64::from_bits)
                .map_err(|_| Error::SnapshotParse {
                    line: line_no,
                    msg: format!("bad f64 bit pattern '{tok}'"),
                })
        })
        .collect()
}

/// Parse a snapshot produced by [`write_state`].
pub fn read_state(r: &mut impl BufRead) -> Result<(Variant, OptimizerState)> {
    let mut lines = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push(line);
        }
    }
    let mut it = lines.iter().enumerate();

    let (n, magic) = it.next().ok_or(Error::SnapshotParse {
        line: 1,
        msg: "empty snapshot".to_string(),
    })?;
    if magic.trim() != MAGIC {
        return Err(Error::SnapshotParse {
            line: n + 1,
            msg: format!("expected '{MAGIC}', found '{magic}'"),
        });
    }

    let mut variant: Option<Variant> = None;
    let mut t: Option<u64> = None;
    let mut m: Option<Vec<f64>> = None;
    let mut full: Option<Vec<f64>> = None;
    let mut row: Option<Vec<f64>> = None;
    let mut col: Option<Vec<f64>> = None;

    for (idx, line) in it {
        let line_no = idx + 1;
        let (tag, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        match tag {
            "variant" => {
                variant = Some(rest.trim().parse().map_err(|e| Error::SnapshotParse {
                    line: line_no,
                    msg: format!("{e}"),
                })?)
            }
            "t" => {
                t = Some(rest.trim().parse().map_err(|_| Error::SnapshotParse {
                    line: line_no,
                    msg: format!("bad step counter '{rest}'"),
                })?)
            }
            "m" => m = Some(parse_f64_values(line_no, rest)?),
            "full" => full = Some(parse_f64_values(line_no, rest)?),
            "row" => row = Some(parse_f64_values(line_no, rest)?),
            "col" => col = Some(parse_f64_values(line_no, rest)?),
            other => {
                return Err(Error::SnapshotParse {
                    line: line_no,
                    msg: format!("unknown field '{other}'"),
                })
            }
        }
    }

    let variant = variant.ok_or(Error::SnapshotParse {
        line: 0,
        msg: "missing 'variant' line".to_string(),
    })?;
    let t = t.ok_or(Error::SnapshotParse {
        line: 0,
        msg: "missing 't' line".to_string(),
    })?;
    let m = m.ok_or(Error::SnapshotParse {
        line: 0,
        msg: "missing 'm' line".to_string(),
    })?;
    let second = match (full, row, col) {
        (Some(f), None, None) => SecondMoment::Full(f),
        (None, Some(row), Some(col)) => SecondMoment::Factored { row, col },
        _ => {
            return Err(Error::SnapshotParse {
                line: 0,
                msg: "need either a 'full' line or both 'row' and 'col'".to_string(),
            })
        }
    };
    Ok((variant, OptimizerState { t, m, second }))
}
