//! Matrix file formats.
//!
//! `SORD` binary layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `SORD` |
//! | 4     | `u32` version = 1 |
//! | 8     | `u64` rows |
//! | 8     | `u64` cols |
//! | 8·rows·cols | `f64` entries, row-major |
//!
//! CSV layout: a first line `rows,cols`, then one comma-separated line per
//! matrix row. Values are written with Rust's shortest round-trip formatting,
//! so a write/read cycle is lossless.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const SORD_MAGIC: &[u8; 4] = b"SORD";
pub const SORD_VERSION: u32 = 1;

pub fn write_sord<W: Write>(m: &Matrix, mut w: W) -> Result<()> {
    w.write_all(SORD_MAGIC)?;
    w.write_all(&SORD_VERSION.to_le_bytes())?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sord<R: Read>(mut r: R) -> Result<Matrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated SORD header".into()))?;
    if &magic != SORD_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected SORD")));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)
        .map_err(|_| Error::Format("truncated SORD header".into()))?;
    let version = u32::from_le_bytes(u32buf);
    if version != SORD_VERSION {
        return Err(Error::Format(format!("unsupported SORD version {version}")));
    }
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)
        .map_err(|_| Error::Format("truncated SORD header".into()))?;
    let rows = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u64buf)
        .map_err(|_| Error::Format("truncated SORD header".into()))?;
    let cols = u64::from_le_bytes(u64buf);
    let len = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| Error::Format(format!("SORD shape {rows}x{cols} too large")))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "SORD payload has {} bytes, expected {} for {rows}x{cols}",
            bytes.len(),
            len * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Matrix::new(rows as usize, cols as usize, data)
}

pub fn write_csv<W: Write>(m: &Matrix, mut w: W) -> Result<()> {
    writeln!(w, "{},{}", m.rows(), m.cols())?;
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<Matrix> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))??;
    let dims: Vec<&str> = header.trim().split(',').collect();
    let parse_dim = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Format(format!("bad CSV header {header:?}, expected rows,cols")))
    };
    if dims.len() != 2 {
        return Err(Error::Format(format!(
            "bad CSV header {header:?}, expected rows,cols"
        )));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad number {tok:?} on row {seen}")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Format(format!(
                "row {seen} has {} values, expected {cols}",
                data.len() - before
            )));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Format(format!("CSV has {seen} rows, header says {rows}")));
    }
    Matrix::new(rows, cols, data)
}

/// On-disk matrix encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Sord,
    Csv,
}

impl MatrixFormat {
    /// Guesses the format from a file extension, defaulting to SORD.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Sord,
        }
    }
}

pub fn save_matrix(m: &Matrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match format {
        MatrixFormat::Sord => write_sord(m, w),
        MatrixFormat::Csv => write_csv(m, w),
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let r = BufReader::new(File::open(path)?);
    match format {
        MatrixFormat::Sord => read_sord(r),
        MatrixFormat::Csv => read_csv(r),
    }
}
