use std::collections::BTreeSet;
use std::path::Path;

use super::{Column, Dataset, NamedColumn};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub label_column: String,
    pub text_columns: Vec<String>,
    /// Optional column holding ground-truth labels (e.g. a corrupted export).
    pub true_label_column: Option<String>,
}

/// Reads a headed CSV. Numeric columns become reals, the named text columns
/// stay raw text, everything else is categorical. Labels are mapped to
/// `[0, C)` in lexicographic order of their string values.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, text_columns: &[&str]) -> Result<Dataset> {
    load_csv_with(
        path,
        &CsvOptions {
            label_column: label_column.to_string(),
            text_columns: text_columns.iter().map(|s| s.to_string()).collect(),
            true_label_column: None,
        },
    )
}

pub fn load_csv_with(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string())),
            _ => Error::Csv {
                row: 0,
                message: e.to_string(),
            },
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let label_idx = find_column(&headers, &opts.label_column)?;
    let true_idx = opts
        .true_label_column
        .as_deref()
        .map(|name| find_column(&headers, name))
        .transpose()?;
    for t in &opts.text_columns {
        find_column(&headers, t)?;
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (row, record) in reader.records().enumerate() {
        // row numbers are 1-based data rows
        let record = record.map_err(|e| Error::Csv {
            row: row + 1,
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                row: row + 1,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            cells[j].push(field.to_string());
        }
    }
    if cells[label_idx].is_empty() {
        return Err(Error::Csv {
            row: 1,
            message: "no data rows".into(),
        });
    }

    let mut label_values: BTreeSet<&str> = cells[label_idx].iter().map(|s| s.trim()).collect();
    if let Some(t) = true_idx {
        label_values.extend(cells[t].iter().map(|s| s.trim()));
    }
    if label_values.len() < 2 {
        return Err(Error::data(format!(
            "label column `{}` has a single class",
            opts.label_column
        )));
    }
    let label_names: Vec<String> = label_values.iter().map(|s| s.to_string()).collect();
    let index_of = |s: &str| label_names.binary_search_by(|l| l.as_str().cmp(s.trim())).unwrap();
    let observed = cells[label_idx].iter().map(|s| index_of(s)).collect();
    let true_labels = true_idx.map(|t| cells[t].iter().map(|s| index_of(s)).collect());

    let mut columns = Vec::new();
    for (j, name) in headers.iter().enumerate() {
        if j == label_idx || Some(j) == true_idx {
            continue;
        }
        let raw = std::mem::take(&mut cells[j]);
        let values = if opts.text_columns.iter().any(|t| t == name) {
            Column::Text(raw)
        } else {
            parse_column(name, raw)?
        };
        columns.push(NamedColumn {
            name: name.clone(),
            values,
        });
    }
    Dataset::with_label_names(columns, observed, true_labels, label_names)
}

fn find_column(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::data(format!("column `{name}` not found in header")))
}

/// A column is numeric when every non-empty cell parses as a real; an empty
/// cell inside a numeric column is rejected.
fn parse_column(name: &str, raw: Vec<String>) -> Result<Column> {
    let parsed: Vec<Option<f64>> = raw.iter().map(|s| s.trim().parse::<f64>().ok()).collect();
    let numeric_cells = parsed.iter().filter(|p| p.is_some()).count();
    let empty_cells = raw.iter().filter(|s| s.trim().is_empty()).count();
    if numeric_cells > 0 && numeric_cells + empty_cells == raw.len() {
        if let Some(row) = raw.iter().position(|s| s.trim().is_empty()) {
            return Err(Error::Csv {
                row: row + 1,
                message: format!("missing value in numeric column `{name}`"),
            });
        }
        return Ok(Column::Numeric(parsed.into_iter().map(Option::unwrap).collect()));
    }
    Ok(Column::Categorical(
        raw.into_iter().map(|s| s.trim().to_string()).collect(),
    ))
}

/// Writes features, the observed label column `label` and, when present,
/// `true_label`. Label cells carry the original label names.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let mut header: Vec<String> = dataset.columns().iter().map(|c| c.name.clone()).collect();
    header.push("label".into());
    if dataset.true_labels().is_some() {
        header.push("true_label".into());
    }
    let io_err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(&header).map_err(io_err)?;
    let names = dataset.label_names();
    for i in 0..dataset.n() {
        let mut row: Vec<String> = dataset
            .columns()
            .iter()
            .map(|c| match &c.values {
                Column::Numeric(v) => format!("{}", v[i]),
                Column::Categorical(v) | Column::Text(v) => v[i].clone(),
            })
            .collect();
        row.push(names[dataset.observed_labels()[i]].clone());
        if let Some(t) = dataset.true_labels() {
            row.push(names[t[i]].clone());
        }
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
