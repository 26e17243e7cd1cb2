//! CSV ingestion: one row per sample, numeric feature cells, one label column
//! with arbitrary categorical values.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use bespoke_core::dataset::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("row {row}, column {column}: cannot parse {cell:?} as a number")]
    NotNumeric { row: usize, column: usize, cell: String },
    #[error("row {row} has {got} columns, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("label column {column} does not exist (rows have {width} columns)")]
    LabelColumn { column: usize, width: usize },
    #[error("{0} contains no samples")]
    Empty(String),
    #[error(transparent)]
    Dataset(#[from] bespoke_core::Error),
}

/// Where the label lives; `None` means the last column.
#[derive(Debug, Clone, Default)]
pub struct CsvSpec {
    pub label_column: Option<usize>,
    /// `None` detects a header: a first row without any numeric cell.
    pub has_header: Option<bool>,
}

/// Class values in ascending order: numeric order when every value parses as
/// a number, string order otherwise.
pub fn sorted_classes(values: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&String> = values.iter().collect();
    let mut classes: Vec<String> = distinct.into_iter().cloned().collect();
    let numeric: Option<Vec<f64>> = classes.iter().map(|v| v.trim().parse::<f64>().ok()).collect();
    if let Some(keys) = numeric {
        let mut pairs: Vec<(f64, String)> = keys.into_iter().zip(classes).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        classes = pairs.into_iter().map(|p| p.1).collect();
    }
    classes
}

fn looks_like_header(row: &csv::StringRecord) -> bool {
    row.iter().all(|c| c.trim().parse::<f64>().is_err())
}

/// Parses CSV text. Rows are numbered from 1 as they appear in the file,
/// columns from 0.
pub fn parse_csv(name: &str, text: &str, spec: &CsvSpec) -> Result<(Dataset, Vec<String>), CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (i, r) in reader.records().enumerate() {
        let r = r.map_err(|source| CsvError::Csv { row: i + 1, source })?;
        if r.iter().all(str::is_empty) {
            continue;
        }
        records.push((i + 1, r));
    }
    let Some((_, first)) = records.first() else {
        return Err(CsvError::Empty(name.into()));
    };
    let width = first.len();
    let header = spec.has_header.unwrap_or_else(|| looks_like_header(first));
    let rows = if header { &records[1..] } else { &records[..] };
    if rows.is_empty() {
        return Err(CsvError::Empty(name.into()));
    }
    let label = spec.label_column.unwrap_or(width - 1);
    if label >= width {
        return Err(CsvError::LabelColumn { column: label, width });
    }
    let mut features = Vec::with_capacity(rows.len());
    let mut raw_labels = Vec::with_capacity(rows.len());
    for (row, r) in rows {
        if r.len() != width {
            return Err(CsvError::Ragged {
                row: *row,
                got: r.len(),
                expected: width,
            });
        }
        let mut x = Vec::with_capacity(width - 1);
        for (column, cell) in r.iter().enumerate() {
            if column == label {
                raw_labels.push(cell.to_string());
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => x.push(v),
                _ => {
                    return Err(CsvError::NotNumeric {
                        row: *row,
                        column,
                        cell: cell.to_string(),
                    })
                }
            }
        }
        features.push(x);
    }
    let classes = sorted_classes(&raw_labels);
    let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let labels = raw_labels.iter().map(|v| index[v.as_str()]).collect();
    Ok((Dataset::new(name, features, labels, classes.len())?, classes))
}

/// Loads a CSV file; the dataset takes the file stem as its name.
pub fn load_csv(path: &Path, spec: &CsvSpec) -> Result<(Dataset, Vec<String>), CsvError> {
    let text = std::fs::read_to_string(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    parse_csv(&name, &text, spec)
}
