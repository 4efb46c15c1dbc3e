//! Field CSV, matrix coordinate dumps and JSON-lines logs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use deadoil_core::adjoint::OuterRecord;
use deadoil_core::{Field, Grid, IterRecord, SparseMatrix};
use serde::Serialize;

use crate::error::AppError;

/// `x,y,value` header, one row per interior node in index order; 17
/// significant digits so binary64 values round-trip exactly.
pub fn field_to_csv(field: &Field) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(64 * field.len() + 16);
    out.push_str("x,y,value\n");
    for (k, v) in field.values().iter().enumerate() {
        let (i, j) = g.ij(k);
        let (x, y) = g.coords(i, j);
        writeln!(out, "{x:.16e},{y:.16e},{v:.16e}").unwrap();
    }
    out
}

pub fn parse_field_csv(text: &str, grid: Grid) -> Result<Field, AppError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "x,y,value" => {}
        _ => {
            return Err(AppError::Format(
                "field CSV must start with 'x,y,value'".into(),
            ))
        }
    }
    let tol = 1e-9 * grid.hx().min(grid.hy());
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in lines {
        let k = values.len();
        if k >= grid.len() {
            return Err(AppError::Format(format!(
                "line {}: more rows than the {} interior nodes",
                lineno + 1,
                grid.len()
            )));
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| AppError::Format(format!("line {}: {e}", lineno + 1)))?;
        let [x, y, v] = cols[..] else {
            return Err(AppError::Format(format!(
                "line {}: expected 3 columns",
                lineno + 1
            )));
        };
        let (i, j) = grid.ij(k);
        let (gx, gy) = grid.coords(i, j);
        if (x - gx).abs() > tol || (y - gy).abs() > tol {
            return Err(AppError::Format(format!(
                "line {}: node ({x}, {y}) does not match grid node ({gx}, {gy})",
                lineno + 1
            )));
        }
        if !v.is_finite() {
            return Err(AppError::Format(format!(
                "line {}: non-finite value",
                lineno + 1
            )));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(AppError::Format(format!(
            "expected {} rows, found {}",
            grid.len(),
            values.len()
        )));
    }
    Ok(Field::from_values(grid, values)?)
}

pub fn read_field_csv(path: &Path, grid: Grid) -> Result<Field, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_field_csv(&text, grid)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn write_field_csv(path: &Path, field: &Field) -> Result<(), AppError> {
    write_text(path, &field_to_csv(field))
}

/// Coordinate text: `row col value` per stored entry, 0-based.
pub fn matrix_to_coordinate(a: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * a.nnz());
    for (r, c, v) in a.triplets() {
        writeln!(out, "{r} {c} {v:.16e}").unwrap();
    }
    out
}

#[derive(Serialize)]
struct IterLine {
    iter: usize,
    residual: f64,
    step: f64,
}

#[derive(Serialize)]
struct HistoryLine {
    iter: usize,
    #[serde(rename = "J")]
    cost: f64,
    stationarity_norm: f64,
    step: f64,
}

fn jsonl<T: Serialize>(items: impl Iterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("plain structs serialize"));
        out.push('\n');
    }
    out
}

/// One `{"iter","residual","step"}` object per line.
pub fn iteration_log_jsonl(records: &[IterRecord]) -> String {
    jsonl(records.iter().map(|r| IterLine {
        iter: r.iter,
        residual: r.residual,
        step: r.step,
    }))
}

/// One `{"iter","J","stationarity_norm","step"}` object per line.
pub fn history_jsonl(records: &[OuterRecord]) -> String {
    jsonl(records.iter().map(|r| HistoryLine {
        iter: r.iter,
        cost: r.cost,
        stationarity_norm: r.stationarity_norm,
        step: r.step,
    }))
}
