//! Labeled datasets: ingestion, synthetic generators, label corruption,
//! labeling-rule aggregation and splitting.

mod io;
mod manifest;
mod noise;
mod rules;
mod split;
mod synth;

pub use io::{load_csv, load_csv_with, write_csv, CsvOptions};
pub use manifest::DatasetManifest;
pub use noise::{apply_feature_dependent_noise, apply_transition_noise, flip_labels, NoiseKind, NoiseTransitionMatrix};
pub use rules::{aggregate_rules, rule_votes, LabelingRule, Predicate, TieBreak};
pub(crate) use split::stratified_order;
pub use split::{split_dataset, SplitIndices, SplitParts, SplitSpec};
pub use synth::{make_blobs, make_two_moons, BlobsConfig};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One column of a raw feature table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) | Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, indices: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(indices.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(indices.iter().map(|&i| v[i].clone()).collect()),
            Column::Text(v) => Column::Text(indices.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedColumn {
    pub name: String,
    pub values: Column,
}

/// Features plus observed labels, with optional ground truth.
///
/// The mislabel mask is derived from the two label vectors, so
/// `mask[i] == (observed[i] != true[i])` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<NamedColumn>,
    observed: Vec<usize>,
    true_labels: Option<Vec<usize>>,
    n_classes: usize,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        columns: Vec<NamedColumn>,
        observed: Vec<usize>,
        true_labels: Option<Vec<usize>>,
        n_classes: usize,
    ) -> Result<Self> {
        let label_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_label_names(columns, observed, true_labels, label_names)
    }

    pub fn with_label_names(
        columns: Vec<NamedColumn>,
        observed: Vec<usize>,
        true_labels: Option<Vec<usize>>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n_classes = label_names.len();
        let n = observed.len();
        if n == 0 {
            return Err(Error::data("dataset must contain at least one example"));
        }
        if n_classes < 2 {
            return Err(Error::data("dataset must have at least two classes"));
        }
        for col in &columns {
            if col.values.len() != n {
                return Err(Error::data(format!(
                    "column `{}` has {} rows, expected {n}",
                    col.name,
                    col.values.len()
                )));
            }
        }
        check_labels(&observed, n_classes)?;
        if let Some(t) = &true_labels {
            if t.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: t.len(),
                });
            }
            check_labels(t, n_classes)?;
        }
        Ok(Self {
            columns,
            observed,
            true_labels,
            n_classes,
            label_names,
        })
    }

    /// Builds a dataset whose features are the numeric columns `x0..x{d-1}`.
    pub fn from_matrix(
        features: &Array2<f64>,
        observed: Vec<usize>,
        true_labels: Option<Vec<usize>>,
        n_classes: usize,
    ) -> Result<Self> {
        if features.nrows() != observed.len() {
            return Err(Error::DimensionMismatch {
                expected: observed.len(),
                found: features.nrows(),
            });
        }
        let columns = features
            .columns()
            .into_iter()
            .enumerate()
            .map(|(j, col)| NamedColumn {
                name: format!("x{j}"),
                values: Column::Numeric(col.to_vec()),
            })
            .collect();
        Self::new(columns, observed, true_labels, n_classes)
    }

    pub fn n(&self) -> usize {
        self.observed.len()
    }

    /// Raw (pre-encoding) column count.
    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn columns(&self) -> &[NamedColumn] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&NamedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn observed_labels(&self) -> &[usize] {
        &self.observed
    }

    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    /// `true` where the observed label differs from the ground truth.
    pub fn mislabel_mask(&self) -> Option<Vec<bool>> {
        self.true_labels
            .as_ref()
            .map(|t| t.iter().zip(&self.observed).map(|(a, b)| a != b).collect())
    }

    pub fn n_mislabeled(&self) -> Option<usize> {
        self.mislabel_mask().map(|m| m.into_iter().filter(|&b| b).count())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        counts(&self.observed, self.n_classes)
    }

    /// Empirical priors of the observed labels.
    pub fn class_priors(&self) -> Vec<f64> {
        priors(&self.observed, self.n_classes)
    }

    pub fn true_class_priors(&self) -> Option<Vec<f64>> {
        self.true_labels.as_ref().map(|t| priors(t, self.n_classes))
    }

    /// Ground truth if present, else the observed labels.
    pub fn truth_or_observed(&self) -> &[usize] {
        self.true_labels.as_deref().unwrap_or(&self.observed)
    }

    pub fn is_numeric(&self) -> bool {
        self.columns.iter().all(|c| matches!(c.values, Column::Numeric(_)))
    }

    /// Dense matrix view of an all-numeric table.
    pub fn numeric_matrix(&self) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((self.n(), self.d()));
        for (j, col) in self.columns.iter().enumerate() {
            match &col.values {
                Column::Numeric(v) => {
                    for (i, &x) in v.iter().enumerate() {
                        out[[i, j]] = x;
                    }
                }
                _ => {
                    return Err(Error::data(format!(
                        "column `{}` is not numeric; encode features first",
                        col.name
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n()) {
            return Err(Error::data(format!(
                "row index {bad} out of range for {} rows",
                self.n()
            )));
        }
        Dataset::with_label_names(
            self.columns
                .iter()
                .map(|c| NamedColumn {
                    name: c.name.clone(),
                    values: c.values.select(indices),
                })
                .collect(),
            indices.iter().map(|&i| self.observed[i]).collect(),
            self.true_labels
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
            self.label_names.clone(),
        )
    }

    pub fn with_observed_labels(&self, observed: Vec<usize>) -> Result<Dataset> {
        if observed.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: observed.len(),
            });
        }
        check_labels(&observed, self.n_classes)?;
        Ok(Dataset {
            observed,
            ..self.clone()
        })
    }

    /// Copy where the current labels become the ground truth. Used before
    /// corruption so the clean labels are retained.
    pub fn with_truth(&self) -> Dataset {
        let truth = self.truth_or_observed().to_vec();
        Dataset {
            true_labels: Some(truth),
            ..self.clone()
        }
    }

    /// Copy whose observed labels are replaced by the ground truth.
    pub fn cleaned(&self) -> Dataset {
        let truth = self.truth_or_observed().to_vec();
        Dataset {
            observed: truth.clone(),
            true_labels: Some(truth),
            ..self.clone()
        }
    }
}

fn check_labels(labels: &[usize], n_classes: usize) -> Result<()> {
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
        return Err(Error::data(format!("label {y} at row {i} outside [0, {n_classes})")));
    }
    Ok(())
}

pub(crate) fn counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut out = vec![0; n_classes];
    for &y in labels {
        out[y] += 1;
    }
    out
}

pub(crate) fn priors(labels: &[usize], n_classes: usize) -> Vec<f64> {
    let n = labels.len() as f64;
    counts(labels, n_classes).into_iter().map(|c| c as f64 / n).collect()
}
