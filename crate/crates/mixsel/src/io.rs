//! Dataset CSV files and JSON/CSV renderings of fits and order tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mixsel_core::em::FitResult;
use mixsel_core::order::OrderEstimate;
use mixsel_core::{Dataset, MixtureParams, Provenance};
use serde_json::{json, Value};

use crate::error::{MixselError, Result};

/// Read `d` numeric columns per row (no header). Blank lines are skipped.
pub fn read_dataset_csv(path: &Path, d: usize) -> Result<Dataset> {
    if d == 0 {
        return Err(MixselError::Config("dimension must be positive".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| MixselError::Data(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            MixselError::Parse { path: path.into(), line, msg: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != d {
            return Err(MixselError::Parse { path: path.into(), line, msg: format!("expected {d} columns, found {}", record.len()) });
        }
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| MixselError::Parse { path: path.into(), line, msg: format!("non-numeric cell `{cell}`") })?;
            if !v.is_finite() {
                return Err(MixselError::Parse { path: path.into(), line, msg: format!("non-finite value `{cell}`") });
            }
            points.push(v);
        }
    }
    if points.is_empty() {
        return Err(MixselError::Data(format!("{}: no data rows", path.display())));
    }
    Dataset::new(points, d, Provenance::Ingested { path: path.display().to_string() }).map_err(|e| MixselError::Data(e.to_string()))
}

/// One row per point, 17 significant digits so reading back is exact.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::with_capacity(data.len() * 24 * data.dim());
    for x in data.iter() {
        let cells: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    write_file(path, &dataset_to_csv(data))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| MixselError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| MixselError::io(path, e))
}

pub fn params_json(p: &MixtureParams) -> Value {
    let locations: Vec<Vec<f64>> = (0..p.order()).map(|i| p.location(i).to_vec()).collect();
    json!({ "q": p.order(), "weights": p.weights(), "locations": locations })
}

pub fn fit_result_json(fit: &FitResult) -> Value {
    let mut v = params_json(&fit.params);
    let obj = v.as_object_mut().expect("object");
    obj.insert("loglik".into(), json!(fit.loglik));
    obj.insert("iterations".into(), json!(fit.iterations));
    obj.insert("converged".into(), json!(fit.converged));
    obj.insert("starts_used".into(), json!(fit.starts_used));
    obj.insert("best_start_index".into(), json!(fit.best_start_index));
    v
}

pub fn order_estimate_json(est: &OrderEstimate) -> Value {
    let rows: Vec<Value> = est
        .rows
        .iter()
        .map(|r| json!({ "q": r.q, "score": r.score, "penalty": r.penalty, "criterion": r.criterion }))
        .collect();
    json!({ "q_hat": est.q_hat, "scan_bound": est.scan_bound, "sieve_radius": est.sieve_radius, "table": rows })
}

pub fn order_table_csv(est: &OrderEstimate) -> String {
    let mut out = String::from("q,score,penalty,criterion\n");
    for r in &est.rows {
        let _ = writeln!(out, "{},{},{},{}", r.q, r.score, r.penalty, r.criterion);
    }
    out
}

/// Aligned text table for terminals.
pub fn order_table_text(est: &OrderEstimate) -> String {
    let mut out = format!("{:>4} {:>18} {:>14} {:>18}\n", "q", "score", "penalty", "criterion");
    for r in &est.rows {
        let mark = if r.q == est.q_hat { " *" } else { "" };
        let _ = writeln!(out, "{:>4} {:>18.6} {:>14.6} {:>18.6}{mark}", r.q, r.score, r.penalty, r.criterion);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "0.1\n0.2\n").unwrap();
        assert_eq!(read_dataset_csv(&p, 1).unwrap().len(), 2);
        fs::write(&p, "a,b\n").unwrap();
        match read_dataset_csv(&p, 2) {
            Err(MixselError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "1,2\n3\n").unwrap();
        match read_dataset_csv(&p, 2) {
            Err(MixselError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
