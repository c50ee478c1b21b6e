//! Textual comparison of two run directories: per-column maximum absolute
//! and relative differences over every CSV the runs share.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::RunError;

#[derive(Clone, Debug)]
struct Csv {
    columns: Vec<String>,
    /// One vector per column; None for empty or non-numeric cells.
    values: Vec<Vec<Option<f64>>>,
    rows: usize,
}

fn read_csv(path: &Path) -> Result<Csv, RunError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RunError::Validation(format!("{}: empty file", path.display())))?;
    let columns: Vec<String> = header.split(',').map(str::to_string).collect();
    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::new(); columns.len()];
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(RunError::Validation(format!(
                "{}: row with {} cells, expected {}",
                path.display(),
                cells.len(),
                columns.len()
            )));
        }
        for (col, cell) in cells.iter().enumerate() {
            values[col].push(if cell.is_empty() { None } else { cell.parse::<f64>().ok() });
        }
        rows += 1;
    }
    Ok(Csv { columns, values, rows })
}

fn csv_files(dir: &Path) -> Result<BTreeSet<String>, RunError> {
    let mut out = BTreeSet::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            out.insert(name);
        }
    }
    Ok(out)
}

/// Per-quantity max absolute and relative differences between two runs.
/// Errors out when a shared file pairs rows on incompatible grids.
pub fn compare_report(dir_a: &Path, dir_b: &Path) -> Result<String, RunError> {
    let files_a = csv_files(dir_a)?;
    let files_b = csv_files(dir_b)?;
    let mut report = String::new();
    let _ = writeln!(report, "compare {} vs {}", dir_a.display(), dir_b.display());

    for only in files_a.difference(&files_b) {
        let _ = writeln!(report, "  {only}: only in {}", dir_a.display());
    }
    for only in files_b.difference(&files_a) {
        let _ = writeln!(report, "  {only}: only in {}", dir_b.display());
    }

    for file in files_a.intersection(&files_b) {
        let a = read_csv(&dir_a.join(file))?;
        let b = read_csv(&dir_b.join(file))?;
        if a.columns != b.columns || a.rows != b.rows {
            return Err(RunError::Validation(format!(
                "{file}: grid mismatch ({} columns x {} rows vs {} x {})",
                a.columns.len(),
                a.rows,
                b.columns.len(),
                b.rows
            )));
        }
        // time axes must agree before value columns mean anything
        if let Some(tc) = a.columns.iter().position(|c| c == "t") {
            let worst = a.values[tc]
                .iter()
                .zip(&b.values[tc])
                .map(|(x, y)| match (x, y) {
                    (Some(x), Some(y)) => (x - y).abs(),
                    _ => f64::INFINITY,
                })
                .fold(0.0, f64::max);
            if worst > 1e-12 {
                return Err(RunError::Validation(format!(
                    "{file}: grid mismatch (time axes differ by {worst:.3e})"
                )));
            }
        }
        let _ = writeln!(report, "  {file}:");
        for (col, name) in a.columns.iter().enumerate() {
            let mut max_abs = 0.0_f64;
            let mut max_rel = 0.0_f64;
            let mut presence_mismatch = 0usize;
            for (x, y) in a.values[col].iter().zip(&b.values[col]) {
                match (x, y) {
                    (Some(x), Some(y)) => {
                        let d = (x - y).abs();
                        max_abs = max_abs.max(d);
                        let scale = x.abs().max(y.abs());
                        if scale > 0.0 {
                            max_rel = max_rel.max(d / scale);
                        }
                    }
                    (None, None) => {}
                    _ => presence_mismatch += 1,
                }
            }
            let _ = write!(report, "    {name}: max_abs={max_abs:.3e} max_rel={max_rel:.3e}");
            if presence_mismatch > 0 {
                let _ = write!(report, " presence_mismatch={presence_mismatch}");
            }
            report.push('\n');
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{emit_csv, Cell};

    #[test]
    fn identical_runs_give_all_zero_diffs() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for d in [&a, &b] {
            emit_csv(
                &d.join("purity.csv"),
                &["t", "p"],
                &[vec![Cell::Float(0.0), Cell::Float(1.0)], vec![Cell::Float(0.1), Cell::Float(0.9)]],
            )
            .unwrap();
        }
        let report = compare_report(&a, &b).unwrap();
        assert!(report.contains("max_abs=0.000e0"), "{report}");
        assert!(!report.contains("presence_mismatch"), "{report}");
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        emit_csv(&a.join("x.csv"), &["t", "p"], &[vec![Cell::Float(0.0), Cell::Float(1.0)]])
            .unwrap();
        emit_csv(
            &b.join("x.csv"),
            &["t", "p"],
            &[vec![Cell::Float(0.5), Cell::Float(1.0)]],
        )
        .unwrap();
        let err = compare_report(&a, &b).unwrap_err();
        assert!(err.to_string().contains("grid mismatch"), "{err}");
    }
}
