// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

/// Where and how to read a delimited feature table.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub label_column: String,
    /// Feature columns to keep, in this order. `None` keeps every column
    /// except the label.
    pub feature_columns: Option<Vec<String>>,
    pub delimiter: u8,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, label_column: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            label_column: label_column.into(),
            feature_columns: None,
            delimiter: b',',
        }
    }
}

/// A numeric feature matrix with string labels, rows in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    /// Sorted distinct labels and each row's index into them.
    pub fn class_table(&self) -> (Vec<String>, Vec<usize>) {
        let table: Vec<String> = self
            .labels
            .iter()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> =
            table.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        let classes = self.labels.iter().map(|l| index[l.as_str()]).collect();
        (table, classes)
    }

    /// `(label, count)` in label order.
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let mut counts = BTreeMap::new();
        for l in &self.labels {
            *counts.entry(l.clone()).or_insert(0usize) += 1;
        }
        counts.into_iter().collect()
    }

    /// Share of the most frequent label.
    pub fn majority_rate(&self) -> f64 {
        let max = self.class_counts().into_iter().map(|(_, c)| c).max().unwrap_or(0);
        max as f64 / self.len().max(1) as f64
    }
}

/// Read a headed, delimited text file. Rows are numbered from 1 (the first
/// line after the header) in error messages.
pub fn load_csv(spec: &DatasetSpec) -> Result<Dataset> {
    let table = read_table(spec, Some(&spec.label_column))?;
    let data = Dataset {
        feature_names: table.feature_names,
        rows: table.rows,
        labels: table.labels.expect("label column requested"),
    };
    if data.class_counts().len() < 2 {
        return Err(Error::Ingestion("need at least 2 distinct labels".into()));
    }
    Ok(data)
}

/// Feature rows plus labels, when the file has them.
pub type FeatureRows = (Vec<Vec<f64>>, Option<Vec<String>>);

/// Feature rows of a file that may lack labels, e.g. for prediction.
/// Labels are read only when `spec.label_column` names an existing column.
pub fn load_features(spec: &DatasetSpec) -> Result<FeatureRows> {
    let table = read_table(spec, None)?;
    Ok((table.rows, table.labels))
}

struct Table {
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Option<Vec<String>>,
}

/// `required_label` must exist; otherwise `spec.label_column` is optional.
fn read_table(spec: &DatasetSpec, required_label: Option<&str>) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_path(&spec.path)
        .map_err(|e| csv_error(spec, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(spec, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Ingestion(format!("{}: empty file", spec.path.display())));
    }
    let find = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Ingestion(format!("{}: no column named '{name}'", spec.path.display()))
        })
    };
    let label_col = match required_label {
        Some(name) => Some(find(name)?),
        None => headers.iter().position(|h| *h == spec.label_column),
    };
    let feature_cols: Vec<usize> = match &spec.feature_columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&c| Some(c) != label_col).collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::Ingestion("no feature columns".into()));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(spec, e))?;
        let row = r + 1;
        let mut values = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("").trim();
            let cell_error = |message: String| Error::Cell {
                row,
                column: headers[c].clone(),
                message,
            };
            if cell.is_empty() {
                return Err(cell_error("blank cell".into()));
            }
            let x: f64 = cell
                .parse()
                .map_err(|_| cell_error(format!("cannot parse '{cell}' as a number")))?;
            if !x.is_finite() {
                return Err(cell_error(format!("non-finite value '{cell}'")));
            }
            values.push(x);
        }
        if let Some(lc) = label_col {
            let label = record.get(lc).unwrap_or("").trim();
            if label.is_empty() {
                return Err(Error::Cell {
                    row,
                    column: headers[lc].clone(),
                    message: "blank label".into(),
                });
            }
            labels.push(label.to_string());
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Ingestion(format!("{}: no data rows", spec.path.display())));
    }
    Ok(Table {
        feature_names: feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        rows,
        labels: label_col.map(|_| labels),
    })
}

fn csv_error(spec: &DatasetSpec, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        let csv::ErrorKind::Io(io) = e.into_kind() else {
            unreachable!()
        };
        return Error::io(&spec.path, io);
    }
    let line = e.position().map(|p| p.line());
    match line {
        Some(line) => Error::Ingestion(format!("{} line {line}: {e}", spec.path.display())),
        None => Error::Ingestion(format!("{}: {e}", spec.path.display())),
    }
}
