//! On-disk formats for feature matrices, labels, and dataset manifests.
//!
//! CSV: a `rows,cols` header line, then one comma-separated row per line.
//! Binary: magic `PCMH`, `u32` version (1), `u32` rows, `u32` cols, then
//! `rows * cols` little-endian `f32` values in row-major order.

use super::{FeatureMatrix, Labels};
use crate::binfmt;
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

const MATRIX_MAGIC: &[u8; 4] = b"PCMH";
const MATRIX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// Guess from the file extension: `.bin` is binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => MatrixFormat::Binary,
            _ => MatrixFormat::Csv,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "binary" | "bin" => Ok(MatrixFormat::Binary),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

pub fn load_feature_matrix(path: &Path, format: MatrixFormat) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    match format {
        MatrixFormat::Csv => parse_csv(reader),
        MatrixFormat::Binary => parse_binary(&mut reader),
    }
}

pub fn save_feature_matrix(m: &FeatureMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    if format == MatrixFormat::Binary {
        check_binary_encodable(m)?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        MatrixFormat::Csv => write_csv(m, &mut w),
        MatrixFormat::Binary => write_binary(m, &mut w),
    }
    .map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_csv<R: BufRead>(reader: R) -> Result<FeatureMatrix> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::MalformedHeader(e.to_string()))?,
        None => return Err(Error::MalformedHeader("empty file".into())),
    };
    let (rows, cols) = parse_header(&header)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut row = 0usize;
    for line in lines {
        let line = line.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if row >= rows {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: row + 1,
                row: Some(row),
            });
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("bad number {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row });
            }
            data.push(v);
        }
        let found = data.len() - before;
        if found != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found,
                row: Some(row),
            });
        }
        row += 1;
    }
    if row != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            found: row,
            row: None,
        });
    }
    FeatureMatrix::new(rows, cols, data)
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = line.trim().split(',').collect();
    if parts.len() != 2 {
        return Err(Error::MalformedHeader(format!(
            "expected \"rows,cols\", got {line:?}"
        )));
    }
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad count {s:?}")))
    };
    let (rows, cols) = (parse(parts[0])?, parse(parts[1])?);
    if rows == 0 || cols == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero-sized matrix {rows}x{cols}"
        )));
    }
    Ok((rows, cols))
}

fn write_csv<W: Write>(m: &FeatureMatrix, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{},{}", m.rows(), m.cols())?;
    for row in m.iter_rows() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            // Display for f64 is the shortest string that parses back to the same bits.
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub(crate) fn parse_binary<R: Read>(r: &mut R) -> Result<FeatureMatrix> {
    binfmt::read_magic(r, MATRIX_MAGIC).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    let version = binfmt::read_u32(r)?;
    if version != MATRIX_VERSION {
        return Err(Error::MalformedHeader(format!(
            "unsupported version {version}"
        )));
    }
    let rows = binfmt::read_u32(r)? as usize;
    let cols = binfmt::read_u32(r)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::MalformedHeader(format!(
            "zero-sized matrix {rows}x{cols}"
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for _ in 0..cols {
            let v = binfmt::read_f32(r).map_err(|_| Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
                row: Some(row),
            })? as f64;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row });
            }
            data.push(v);
        }
    }
    binfmt::expect_eof(r)?;
    FeatureMatrix::new(rows, cols, data)
}

fn check_binary_encodable(m: &FeatureMatrix) -> Result<()> {
    binfmt::to_u32(m.rows(), "rows")?;
    binfmt::to_u32(m.cols(), "cols")?;
    for (i, row) in m.iter_rows().enumerate() {
        if row.iter().any(|&v| !(v as f32).is_finite()) {
            return Err(Error::NonFiniteValue { row: i });
        }
    }
    Ok(())
}

/// Callers must have run `check_binary_encodable`.
fn write_binary<W: Write>(m: &FeatureMatrix, w: &mut W) -> std::io::Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    binfmt::write_u32(w, MATRIX_VERSION)?;
    binfmt::write_u32(w, m.rows() as u32)?;
    binfmt::write_u32(w, m.cols() as u32)?;
    for v in m.data() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// One label per line; a line with commas holds a multi-label set.
pub fn load_labels(path: &Path) -> Result<Labels> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sets = Vec::new();
    for (row, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let set = line
            .split(',')
            .map(|f| {
                f.trim().parse::<i64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("bad label {f:?} in {}", path.display()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sets.push(set);
    }
    Ok(Labels::multi(sets))
}

pub fn save_labels(labels: &Labels, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for set in labels.sets() {
        let line: Vec<String> = set.iter().map(i64::to_string).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Flat `key=value` file; `#` starts a comment line.
pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_values(&text)
}

pub(crate) fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            row,
            message: format!("expected key=value, got {line:?}"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn write_manifest(entries: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
