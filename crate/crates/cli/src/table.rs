//! CSV emission: fixed 12-significant-digit floats, empty cells for absent
//! values, newline-terminated UTF-8, atomic write (temp file + rename).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::RunError;

#[derive(Clone, Debug)]
pub enum Cell {
    Float(f64),
    OptFloat(Option<f64>),
    Int(i64),
    Text(String),
    Bool(bool),
}

/// 12 significant digits in scientific notation; −0 normalized.
pub fn format_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

fn write_cell(out: &mut String, cell: &Cell) {
    match cell {
        Cell::Float(x) => out.push_str(&format_float(*x)),
        Cell::OptFloat(Some(x)) => out.push_str(&format_float(*x)),
        Cell::OptFloat(None) => {}
        Cell::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Cell::Text(s) => out.push_str(s),
        Cell::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
    }
}

/// Write one CSV with a header row; every data row must match its arity.
pub fn emit_csv(path: &Path, columns: &[&str], rows: &[Vec<Cell>]) -> Result<(), RunError> {
    let mut text = String::new();
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        assert_eq!(row.len(), columns.len(), "row arity does not match header");
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                text.push(',');
            }
            write_cell(&mut text, cell);
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Temp-file-then-rename write in the destination directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let file_name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| RunError::Validation(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{file_name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_twelve_significant_digits() {
        assert_eq!(format_float(1.0), "1.00000000000e0");
        assert_eq!(format_float(0.0), "0.00000000000e0");
        assert_eq!(format_float(-0.0), "0.00000000000e0");
        assert_eq!(format_float(0.967_708_865_482_387), "9.67708865482e-1");
    }

    #[test]
    fn csv_rows_and_empty_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        emit_csv(
            &path,
            &["t", "r"],
            &[
                vec![Cell::Float(0.0), Cell::OptFloat(None)],
                vec![Cell::Float(0.5), Cell::OptFloat(Some(1.0))],
            ],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "t,r\n0.00000000000e0,\n5.00000000000e-1,1.00000000000e0\n"
        );
    }
}
