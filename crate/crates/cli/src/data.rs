//! CSV input and output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{CliError, CliResult};

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    /// Row-major cells.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn to_array(&self) -> Array2<f64> {
        let p = self.names.len();
        let flat: Vec<f64> = self.rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((self.rows.len(), p), flat).expect("rectangular table")
    }
}

/// Read a comma-separated table with a header row. Empty or non-numeric
/// cells are rejected with their location.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let where_ = path.display();
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{where_}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{where_}: missing header row")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row_no = i + 1;
        let rec = rec.map_err(|e| CliError::Data(format!("{where_}: data row {row_no}: {e}")))?;
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            let col = &names[j];
            if cell.is_empty() {
                return Err(CliError::Data(format!(
                    "{where_}: missing value at data row {row_no}, column {} ({col})",
                    j + 1
                )));
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(CliError::Data(format!(
                        "{where_}: non-numeric value {cell:?} at data row {row_no}, column {} ({col})",
                        j + 1
                    )))
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{where_}: no data rows")));
    }
    Ok(Table { names, rows })
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    let file = File::create(path).map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

pub fn write_rows(mut w: impl Write, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = csv::Writer::from_writer(&mut w);
    out.write_record(header).map_err(|e| CliError::Io(e.into()))?;
    for r in rows {
        out.write_record(r).map_err(|e| CliError::Io(e.into()))?;
    }
    out.flush()?;
    drop(out);
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_numeric_table() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "m1,m2\n1,2.5\n-1,1e-3\n");
        let t = read_table(&p).unwrap();
        assert_eq!(t.names, vec!["m1", "m2"]);
        assert_eq!(t.rows, vec![vec![1.0, 2.5], vec![-1.0, 1e-3]]);
    }

    #[test]
    fn reports_cell_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "m1,m2\n1,2\n3,x\n");
        let e = read_table(&p).unwrap_err();
        assert_eq!(e.exit_code(), 4);
        assert!(e.to_string().contains("data row 2, column 2 (m2)"), "{e}");
        let p = write(&dir, "b.csv", "m1,m2\n1,\n");
        assert!(read_table(&p).unwrap_err().to_string().contains("missing value at data row 1, column 2"));
    }
}
