//! CSV datasets: a header row, then one observation per line.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{BenchError, Result};

/// Reads rows of floats. Every row must have the same number of columns.
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| BenchError::Invalid(format!("row {}: `{f}` is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(|r: &Vec<f64>| r.len()) {
            if row.len() != first {
                return Err(BenchError::Invalid(format!(
                    "row {} has {} columns, expected {first}",
                    line + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_rows(std::fs::File::open(path)?)
}

/// Loads a single-column series.
pub fn load_series(path: &Path) -> Result<Vec<f64>> {
    let rows = load_rows(path)?;
    if rows.first().is_some_and(|r| r.len() != 1) {
        return Err(BenchError::Invalid(format!("{} must have exactly one column", path.display())));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

pub fn write_rows<W: Write>(writer: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_checks_shape() {
        let rows = read_rows("a,b\n1,2\n3.5, -4\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.5, -4.0]]);
        assert!(read_rows("a,b\n1,2\n3\n".as_bytes()).is_err());
        assert!(read_rows("a\nx\n".as_bytes()).is_err());
    }

    #[test]
    fn round_trip() {
        let mut buf = Vec::new();
        let rows = vec![vec![0.25, -1.0], vec![1e-3, 7.0]];
        write_rows(&mut buf, &["p".into(), "q".into()], &rows).unwrap();
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }
}
