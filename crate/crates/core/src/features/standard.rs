use std::collections::BTreeSet;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Block {
    Numeric { column: String, mean: f64, std: f64 },
    OneHot { column: String, categories: Vec<String> },
}

/// Per-column standardisation of numeric columns and one-hot encoding of
/// categorical ones. Text columns are skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardPreprocessor {
    blocks: Vec<Block>,
}

/// Fits means, population standard deviations and category tables on
/// `train` only.
pub fn fit_standard_preprocessor(train: &Dataset) -> Result<StandardPreprocessor> {
    let mut blocks = Vec::new();
    for col in train.columns() {
        match &col.values {
            Column::Numeric(v) => {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                blocks.push(Block::Numeric {
                    column: col.name.clone(),
                    mean,
                    std: var.sqrt(),
                });
            }
            Column::Categorical(v) => {
                let categories: BTreeSet<&String> = v.iter().collect();
                blocks.push(Block::OneHot {
                    column: col.name.clone(),
                    categories: categories.into_iter().cloned().collect(),
                });
            }
            Column::Text(_) => {}
        }
    }
    Ok(StandardPreprocessor { blocks })
}

impl StandardPreprocessor {
    pub fn output_dim(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b {
                Block::Numeric { .. } => 1,
                Block::OneHot { categories, .. } => categories.len(),
            })
            .sum()
    }

    /// Zero-variance columns map to 0; unseen categories map to an all-zero
    /// block.
    pub fn transform(&self, dataset: &Dataset) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((dataset.n(), self.output_dim()));
        let mut offset = 0;
        for block in &self.blocks {
            match block {
                Block::Numeric { column, mean, std } => {
                    let v = match lookup(dataset, column)? {
                        Column::Numeric(v) => v,
                        _ => return Err(type_mismatch(column)),
                    };
                    for (i, x) in v.iter().enumerate() {
                        out[[i, offset]] = if *std > 0.0 { (x - mean) / std } else { 0.0 };
                    }
                    offset += 1;
                }
                Block::OneHot { column, categories } => {
                    let v = match lookup(dataset, column)? {
                        Column::Categorical(v) => v,
                        _ => return Err(type_mismatch(column)),
                    };
                    for (i, x) in v.iter().enumerate() {
                        if let Ok(k) = categories.binary_search(x) {
                            out[[i, offset + k]] = 1.0;
                        }
                    }
                    offset += categories.len();
                }
            }
        }
        Ok(out)
    }
}

fn lookup<'a>(dataset: &'a Dataset, name: &str) -> Result<&'a Column> {
    dataset
        .column(name)
        .map(|c| &c.values)
        .ok_or_else(|| Error::data(format!("column `{name}` missing at transform time")))
}

fn type_mismatch(name: &str) -> Error {
    Error::data(format!("column `{name}` changed type since fit"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::NamedColumn;

    fn ds(cols: Vec<(&str, Column)>, n: usize) -> Dataset {
        Dataset::new(
            cols.into_iter()
                .map(|(name, values)| NamedColumn {
                    name: name.into(),
                    values,
                })
                .collect(),
            (0..n).map(|i| i % 2).collect(),
            None,
            2,
        )
        .unwrap()
    }

    #[test]
    fn two_point_standardisation() {
        let d = ds(vec![("a", Column::Numeric(vec![1.0, 3.0]))], 2);
        let t = fit_standard_preprocessor(&d).unwrap();
        let z = t.transform(&d).unwrap();
        assert_eq!(z.column(0).to_vec(), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let d = ds(vec![("a", Column::Numeric(vec![5.0, 5.0, 5.0]))], 3);
        let t = fit_standard_preprocessor(&d).unwrap();
        assert_eq!(t.transform(&d).unwrap().column(0).to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn unseen_category_is_zero_block() {
        let cats = |v: &[&str]| Column::Categorical(v.iter().map(|s| s.to_string()).collect());
        let train = ds(vec![("c", cats(&["red", "blue"]))], 2);
        let t = fit_standard_preprocessor(&train).unwrap();
        let z = t.transform(&train).unwrap();
        // categories sorted: blue, red
        assert_eq!(z.row(0).to_vec(), vec![0.0, 1.0]);
        let test = ds(vec![("c", cats(&["green", "blue"]))], 2);
        let z = t.transform(&test).unwrap();
        assert_eq!(z.row(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(z.row(1).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn fit_reads_only_the_given_rows() {
        let full = ds(vec![("a", Column::Numeric(vec![1.0, 3.0, 100.0, -50.0]))], 4);
        let train = full.subset(&[0, 1]).unwrap();
        let t = fit_standard_preprocessor(&train).unwrap();
        let z = t.transform(&full).unwrap();
        assert_eq!(z[[0, 0]], -1.0);
        assert_eq!(z[[2, 0]], 98.0);
    }
}
