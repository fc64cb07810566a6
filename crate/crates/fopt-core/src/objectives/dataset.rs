//! Plain-text columnar dumps of synthetic datasets.
//!
//! One `#`-prefixed header of column names, then one whitespace-separated
//! row per example. Values are written with Rust's shortest-roundtrip float
//! formatting, so a dump-load cycle is bitwise exact.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Writes named columns of equal length as a header plus rows.
pub fn write_columns(w: &mut dyn Write, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    if names.is_empty() || columns.is_empty() {
        return Err(Error::EmptyInput { what: "write_columns" });
    }
    if names.len() != columns.len() {
        return Err(Error::LengthMismatch {
            what: "write_columns names",
            expected: columns.len(),
            got: names.len(),
        });
    }
    let rows = columns[0].len();
    for c in columns {
        if c.len() != rows {
            return Err(Error::LengthMismatch {
                what: "write_columns column",
                expected: rows,
                got: c.len(),
            });
        }
    }
    writeln!(w, "# {}", names.join(" "))?;
    for r in 0..rows {
        for (i, c) in columns.iter().enumerate() {
            if i > 0 {
                write!(w, " ")?;
            }
            write!(w, "{}", c[r])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a dump produced by [`write_columns`] back into named columns.
pub fn read_columns(r: &mut dyn BufRead) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = r.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::DatasetParse {
                line: 1,
                msg: "empty file".to_string(),
            })
        }
    };
    let names: Vec<String> = match header.strip_prefix('#') {
        Some(rest) => rest.split_whitespace().map(str::to_string).collect(),
        None => {
            return Err(Error::DatasetParse {
                line: 1,
                msg: "missing '#' header".to_string(),
            })
        }
    };
    if names.is_empty() {
        return Err(Error::DatasetParse {
            line: 1,
            msg: "header names no columns".to_string(),
        });
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != names.len() {
            return Err(Error::DatasetParse {
                line: lineno + 2,
                msg: format!("expected {} fields, got {}", names.len(), fields.len()),
            });
        }
        for (col, field) in columns.iter_mut().zip(&fields) {
            let v: f64 = field.parse().map_err(|_| Error::DatasetParse {
                line: lineno + 2,
                msg: format!("bad float '{field}'"),
            })?;
            col.push(v);
        }
    }
    Ok((names, columns))
}
