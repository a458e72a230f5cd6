//! Plain-text complex matrices: one row per line, entries written as
//! `re+imj` and separated by commas. State vectors hold one entry per line.
//! Blank lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::path::Path;

use sagnac_core::qstate::StateVector;
use sagnac_core::{CMatrix, Complex64};

use crate::error::{Error, Result};

/// Shortest round-trip decimal, switching to exponent form for very small or
/// large magnitudes.
fn number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{a}")
    } else {
        format!("{a:e}")
    }
}

pub fn format_complex(z: Complex64) -> String {
    let re_sign = if z.re.is_sign_negative() { "-" } else { "" };
    let im_sign = if z.im.is_sign_negative() { "-" } else { "+" };
    format!("{re_sign}{}{im_sign}{}j", number(z.re), number(z.im))
}

pub fn parse_complex(text: &str) -> std::result::Result<Complex64, String> {
    text.trim()
        .parse::<Complex64>()
        .map_err(|_| format!("`{}` is not a complex number", text.trim()))
}

pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|&z| format_complex(z)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Parses matrix text; `path` only labels errors.
pub fn parse_matrix(text: &str, path: &Path) -> Result<CMatrix> {
    let mut rows = Vec::new();
    for (i, line) in numbered_lines(text) {
        let row = line
            .split(',')
            .map(parse_complex)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|m| Error::format(path, i, m))?;
        if let Some(first) = rows.first() {
            let first: &Vec<Complex64> = first;
            if row.len() != first.len() {
                return Err(Error::format(
                    path,
                    i,
                    format!("row has {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, 0, "no matrix rows"));
    }
    CMatrix::from_rows(&rows).map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn format_state(psi: &StateVector) -> String {
    psi.amplitudes().iter().map(|&z| format_complex(z) + "\n").collect()
}

/// Parses a state vector. The vector must already be normalized.
pub fn parse_state(text: &str, path: &Path) -> Result<StateVector> {
    let mut amps = Vec::new();
    for (i, line) in numbered_lines(text) {
        amps.push(parse_complex(line).map_err(|m| Error::format(path, i, m))?);
    }
    StateVector::new(amps).map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn read_state(path: &Path) -> Result<StateVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_state(&text, path)
}

fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}
