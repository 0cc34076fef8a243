//! Plain-text complex matrix format.
//!
//! ```text
//! p p
//! re:im re:im ... (p entries)
//! ...             (p lines)
//! ```
//!
//! Writers emit 17 significant digits so a round trip is lossless. Readers
//! reject payloads that are not Hermitian within [`READ_HERMITIAN_TOL`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hermitian::{HermitianMatrix, C64};

pub const READ_HERMITIAN_TOL: f64 = 1e-9;

pub fn write_cmx<W: Write>(m: &HermitianMatrix, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let p = m.dim();
    writeln!(out, "{p} {p}")?;
    for j in 0..p {
        let mut line = String::with_capacity(p * 48);
        for k in 0..p {
            if k > 0 {
                line.push(' ');
            }
            let z = m.get(j, k);
            line.push_str(&format!("{:.16e}:{:.16e}", z.re, z.im));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_cmx<R: Read>(input: R) -> Result<HermitianMatrix> {
    let reader = BufReader::new(input);
    let mut lines = reader
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let header = header?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |s: &str| {
        s.parse::<usize>().map_err(|e| Error::Parse {
            line: 1,
            message: format!("bad dimension {s:?}: {e}"),
        })
    };
    if dims.len() != 2 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected `p p`, got {header:?}"),
        });
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if rows != cols || rows == 0 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected a non-empty square matrix, got {rows}x{cols}"),
        });
    }
    let p = rows;

    let mut data = DMatrix::zeros(p, p);
    for j in 0..p {
        let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
            line: j + 2,
            message: format!("expected {p} rows, found {j}"),
        })?;
        let line = line?;
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != p {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {p} entries, found {}", entries.len()),
            });
        }
        for (k, entry) in entries.iter().enumerate() {
            data[(j, k)] = parse_entry(entry).ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("malformed entry {entry:?}"),
            })?;
        }
    }
    if let Some((idx, _)) = lines.next() {
        return Err(Error::Parse {
            line: idx + 1,
            message: "trailing data after matrix".into(),
        });
    }
    HermitianMatrix::with_tolerance(data, READ_HERMITIAN_TOL)
}

fn parse_entry(s: &str) -> Option<C64> {
    let (re, im) = s.split_once(':')?;
    Some(C64::new(re.parse().ok()?, im.parse().ok()?))
}

pub fn save_cmx(m: &HermitianMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_cmx(m, File::create(path)?)
}

pub fn load_cmx(path: impl AsRef<Path>) -> Result<HermitianMatrix> {
    read_cmx(File::open(path)?)
}
