use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::tokenize;
use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// Term-frequency times smoothed inverse document frequency,
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, with L2-normalised rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    column: String,
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

pub fn fit_tfidf(train: &Dataset, text_column: &str) -> Result<TfidfVectorizer> {
    let docs = text_values(train, text_column)?;
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        let mut terms: Vec<String> = tokenize(doc).collect();
        terms.sort_unstable();
        terms.dedup();
        for t in terms {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::data(format!(
            "column `{text_column}` yields an empty vocabulary"
        )));
    }
    let n_docs = docs.len() as f64;
    let idf = df
        .values()
        .map(|&d| ((1.0 + n_docs) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let vocabulary = df.into_keys().enumerate().map(|(i, t)| (t, i)).collect();
    Ok(TfidfVectorizer {
        column: text_column.to_string(),
        vocabulary,
        idf,
    })
}

impl TfidfVectorizer {
    pub fn output_dim(&self) -> usize {
        self.idf.len()
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    /// Unseen tokens are ignored; documents without known tokens become zero
    /// rows.
    pub fn transform(&self, dataset: &Dataset) -> Result<Array2<f64>> {
        let docs = text_values(dataset, &self.column)?;
        let mut out = Array2::zeros((docs.len(), self.output_dim()));
        for (i, doc) in docs.iter().enumerate() {
            for t in tokenize(doc) {
                if let Some(&k) = self.vocabulary.get(&t) {
                    out[[i, k]] += 1.0;
                }
            }
            let mut row = out.row_mut(i);
            row.zip_mut_with(&ndarray::ArrayView1::from(&self.idf), |v: &mut f64, idf: &f64| {
                *v *= *idf
            });
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row /= norm;
            }
        }
        Ok(out)
    }
}

fn text_values<'a>(dataset: &'a Dataset, name: &str) -> Result<&'a [String]> {
    match dataset.column(name).map(|c| &c.values) {
        Some(Column::Text(v)) | Some(Column::Categorical(v)) => Ok(v),
        Some(_) => Err(Error::data(format!("column `{name}` is not a text column"))),
        None => Err(Error::data(format!("text column `{name}` not found"))),
    }
}
