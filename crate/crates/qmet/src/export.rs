//! CSV and JSON serialization of matrices, unitaries and run artifacts.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Formats a complex matrix as CSV with `re,im` column pairs.
pub fn complex_matrix_csv(m: &DMatrix<Complex64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let z = m[(i, j)];
            let _ = write!(out, "{:.17e},{:.17e}", z.re, z.im);
        }
        out.push('\n');
    }
    out
}

/// Parses a complex matrix from the `re,im` pair CSV format.
pub fn complex_matrix_from_csv(text: &str) -> Result<DMatrix<Complex64>> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("line {}: bad number {f:?}: {e}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        if !fields.len().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "line {}: odd field count {}",
                lineno + 1,
                fields.len()
            )));
        }
        rows.push(
            fields
                .chunks(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        );
    }
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Config("empty matrix CSV".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config("ragged matrix CSV".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Writes a unitary to `path` in the complex CSV format.
pub fn write_unitary(path: &Path, u: &DMatrix<Complex64>) -> Result<()> {
    std::fs::write(path, complex_matrix_csv(u))?;
    Ok(())
}

/// Reads a unitary from a complex CSV file.
pub fn read_unitary(path: &Path) -> Result<DMatrix<Complex64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read unitary {}: {e}", path.display())))?;
    let m = complex_matrix_from_csv(&text)?;
    if !m.is_square() {
        return Err(Error::Config(format!(
            "unitary file {} is {}×{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

/// Formats a real grid as plain CSV, row-major.
pub fn real_grid_csv(values: &[f64], ncols: usize) -> String {
    let mut out = String::new();
    for row in values.chunks(ncols) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Hex SHA-256 digest of a byte string, used in run manifests.
pub fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}
