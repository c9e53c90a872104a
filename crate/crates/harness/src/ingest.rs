//! Reading experiment datasets from CSV files.

use std::collections::BTreeMap;
use std::path::Path;

use ci_robust_core::{Dataset64, Matrix64};

/// What went wrong while turning a CSV file into a dataset.
#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not valid CSV: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path} has no data rows")]
    EmptyFile { path: String },
    #[error("column {name:?} is not in the CSV header")]
    MissingColumn { name: String },
    #[error("data row {row}, column {column:?}: {value:?} is not a finite number")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
}

/// Loads the named columns of a CSV file into a dataset, preserving row
/// order.  The first row must be a header; every selected cell must parse
/// as a finite number.
pub fn load_csv(
    path: &Path,
    x_cols: &[String],
    y_cols: &[String],
    z_cols: &[String],
) -> Result<Dataset64, IngestError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: display.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|source| IngestError::Csv {
            path: display.clone(),
            source,
        })?
        .clone();
    let mut positions = BTreeMap::new();
    for (idx, name) in headers.iter().enumerate() {
        positions.entry(name.to_string()).or_insert(idx);
    }
    let locate = |names: &[String]| -> Result<Vec<usize>, IngestError> {
        names
            .iter()
            .map(|name| {
                positions
                    .get(name)
                    .copied()
                    .ok_or_else(|| IngestError::MissingColumn { name: name.clone() })
            })
            .collect()
    };
    let x_idx = locate(x_cols)?;
    let y_idx = locate(y_cols)?;
    let z_idx = locate(z_cols)?;

    let mut x_data = Vec::new();
    let mut y_data = Vec::new();
    let mut z_data = Vec::new();
    let mut n = 0usize;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|source| IngestError::Csv {
            path: display.clone(),
            source,
        })?;
        let read_cell = |col: usize| -> Result<f64, IngestError> {
            let raw = record.get(col).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(IngestError::NonNumericCell {
                    row: row_idx + 1,
                    column: headers.get(col).unwrap_or("").to_string(),
                    value: raw.to_string(),
                }),
            }
        };
        for &col in &x_idx {
            x_data.push(read_cell(col)?);
        }
        for &col in &y_idx {
            y_data.push(read_cell(col)?);
        }
        for &col in &z_idx {
            z_data.push(read_cell(col)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(IngestError::EmptyFile { path: display });
    }

    let x = Matrix64::new(n, x_idx.len(), x_data).expect("cell count matches row count");
    let y = Matrix64::new(n, y_idx.len(), y_data).expect("cell count matches row count");
    let z = Matrix64::new(n, z_idx.len(), z_data).expect("cell count matches row count");
    Ok(Dataset64::new(x, y, z).expect("all blocks share a row count"))
}

/// Expands a discrete column into indicator columns, one per distinct
/// value in ascending order.
pub fn one_hot(values: &[f64]) -> Matrix64 {
    let mut levels: Vec<f64> = values.to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("ingested values are finite"));
    levels.dedup();
    let mut out = Matrix64::zeros(values.len(), levels.len());
    for (i, v) in values.iter().enumerate() {
        let j = levels
            .iter()
            .position(|l| l == v)
            .expect("every value is one of its own levels");
        out.set(i, j, 1.0);
    }
    out
}

/// Replaces a single-column `z` by its one-hot expansion.
pub fn one_hot_z(data: &Dataset64) -> Dataset64 {
    let z = data.z().col_vec(0);
    data.with_z(one_hot(&z))
        .expect("the expansion keeps the row count")
}
