//! Reading pair files, certificates and tolerance overrides.

use std::io::Read;
use std::path::Path;

use cqlf_core::{Matrix, ToleranceConfig, Vector};
use serde_json::Value;

use crate::Failure;

/// Reads `path`, or standard input when `path` is `-`.
pub fn read_document(path: &Path) -> Result<Value, Failure> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Failure::input(format!("cannot read standard input: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("malformed JSON: {e}")))
}

fn number(v: &Value, what: &str) -> Result<f64, Failure> {
    let x = v
        .as_f64()
        .ok_or_else(|| Failure::input(format!("{what}: expected a number, found {v}")))?;
    if !x.is_finite() {
        return Err(Failure::input(format!("{what}: non-finite number")));
    }
    Ok(x)
}

pub fn vector(doc: &Value, key: &str) -> Result<Option<Vector>, Failure> {
    let Some(v) = doc.get(key) else {
        return Ok(None);
    };
    let items = v
        .as_array()
        .ok_or_else(|| Failure::input(format!("\"{key}\" must be an array of numbers")))?;
    let xs = items
        .iter()
        .map(|x| number(x, key))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Some(Vector::from_vec(xs)))
}

/// Row-major array of arrays; rows must have equal length.
pub fn matrix(doc: &Value, key: &str) -> Result<Option<Matrix>, Failure> {
    let Some(v) = doc.get(key) else {
        return Ok(None);
    };
    let rows = v
        .as_array()
        .ok_or_else(|| Failure::input(format!("\"{key}\" must be an array of rows")))?;
    if rows.is_empty() {
        return Err(Failure::input(format!("\"{key}\" is empty")));
    }
    let mut data = Vec::new();
    let mut cols = None;
    for row in rows {
        let row = row
            .as_array()
            .ok_or_else(|| Failure::input(format!("\"{key}\": each row must be an array")))?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(Failure::input(format!(
                "\"{key}\": rows have different lengths"
            )));
        }
        for x in row {
            data.push(number(x, key)?);
        }
    }
    Ok(Some(Matrix::from_row_slice(
        rows.len(),
        cols.unwrap_or(0),
        &data,
    )))
}

pub fn required_matrix(doc: &Value, key: &str) -> Result<Matrix, Failure> {
    matrix(doc, key)?.ok_or_else(|| Failure::input(format!("missing \"{key}\"")))
}

/// Tolerances: `residual_tol` comes from the flag (or `CQLF_TOL`), else the
/// document, else the default; the other tolerances scale with it unless the
/// document sets them explicitly.
pub fn tolerances(doc: Option<&Value>, flag: Option<f64>) -> Result<ToleranceConfig, Failure> {
    let section = doc.and_then(|d| d.get("tolerances"));
    if let Some(s) = section {
        if !s.is_object() {
            return Err(Failure::input("\"tolerances\" must be an object"));
        }
    }
    let field = |key: &str| -> Result<Option<f64>, Failure> {
        section
            .and_then(|s| s.get(key))
            .map(|v| number(v, key))
            .transpose()
    };
    let residual = match flag {
        Some(t) => t,
        None => field("residual_tol")?.unwrap_or(ToleranceConfig::default().residual_tol),
    };
    let mut cfg = ToleranceConfig::with_residual_tol(residual);
    if let Some(t) = field("eig_tol")? {
        cfg.eig_tol = t;
    }
    if let Some(t) = field("psd_tol")? {
        cfg.psd_tol = t;
    }
    if let Some(v) = section.and_then(|s| s.get("scan_points")) {
        cfg.scan_points = v
            .as_u64()
            .ok_or_else(|| Failure::input("scan_points must be a positive integer"))?
            as usize;
    }
    cfg.validate().map_err(Failure::from)?;
    Ok(cfg)
}

#[derive(Debug)]
pub enum Certificate {
    Cqlf(Matrix),
    Witness(Vector, Vector),
}

/// The `certificate` object of a decide report: `{"P": …}` or `{"v", "w"}`.
pub fn certificate(doc: &Value) -> Result<Certificate, Failure> {
    let cert = match doc.get("certificate") {
        Some(c) if c.is_object() => c,
        _ => return Err(Failure::input("missing \"certificate\" object")),
    };
    if let Some(p) = matrix(cert, "P")? {
        return Ok(Certificate::Cqlf(p));
    }
    match (vector(cert, "v")?, vector(cert, "w")?) {
        (Some(v), Some(w)) => Ok(Certificate::Witness(v, w)),
        _ => Err(Failure::input(
            "certificate needs either \"P\" or both \"v\" and \"w\"",
        )),
    }
}
