//! Feature preprocessing: standardisation with one-hot encoding for tabular
//! columns, TF-IDF for text, and random Fourier features on top of the
//! standardised tabular block.

mod rff;
mod standard;
mod tfidf;

pub use rff::{fit_rff, RandomFourierFeatures, DEFAULT_RFF_COMPONENTS};
pub use standard::{fit_standard_preprocessor, StandardPreprocessor};
pub use tfidf::{fit_tfidf, TfidfVectorizer};

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Column, Dataset};
use crate::error::{Error, Result};

/// Lowercased alphanumeric runs; everything else separates tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Random Fourier components applied to the tabular block; `None` keeps
    /// the standardised features as they are.
    pub rff_components: Option<usize>,
    pub seed: u64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            rff_components: Some(DEFAULT_RFF_COMPONENTS),
            seed: 0,
        }
    }
}

/// Fitted transformer. Every variant is fit on training rows only and
/// transforms deterministically afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureTransformer {
    Standard(StandardPreprocessor),
    Tfidf(TfidfVectorizer),
    Rff(RandomFourierFeatures),
    Composite(FeaturePipeline),
}

impl FeatureTransformer {
    pub fn output_dim(&self) -> usize {
        match self {
            FeatureTransformer::Standard(t) => t.output_dim(),
            FeatureTransformer::Tfidf(t) => t.output_dim(),
            FeatureTransformer::Rff(t) => t.output_dim(),
            FeatureTransformer::Composite(t) => t.output_dim(),
        }
    }

    /// Applies the transformer to a dataset. The RFF variant expects an
    /// already-numeric table.
    pub fn transform(&self, dataset: &Dataset) -> Result<Array2<f64>> {
        match self {
            FeatureTransformer::Standard(t) => t.transform(dataset),
            FeatureTransformer::Tfidf(t) => t.transform(dataset),
            FeatureTransformer::Rff(t) => t.transform(&dataset.numeric_matrix()?),
            FeatureTransformer::Composite(t) => t.transform(dataset),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Tabular columns go through the standardiser and optionally RFF; every
/// text column gets its own TF-IDF block. Blocks are concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub tabular: Option<StandardPreprocessor>,
    pub rff: Option<RandomFourierFeatures>,
    pub text: Vec<TfidfVectorizer>,
}

impl FeaturePipeline {
    pub fn fit(train: &Dataset, opts: &FeatureOptions) -> Result<Self> {
        let has_tabular = train.columns().iter().any(|c| !matches!(c.values, Column::Text(_)));
        let tabular = if has_tabular {
            Some(fit_standard_preprocessor(train)?)
        } else {
            None
        };
        let rff = match (&tabular, opts.rff_components) {
            (Some(t), Some(components)) => {
                let z = t.transform(train)?;
                Some(fit_rff(&z, components, opts.seed)?)
            }
            _ => None,
        };
        let text = train
            .columns()
            .iter()
            .filter(|c| matches!(c.values, Column::Text(_)))
            .map(|c| fit_tfidf(train, &c.name))
            .collect::<Result<Vec<_>>>()?;
        if tabular.is_none() && text.is_empty() {
            return Err(Error::data("dataset has no feature columns"));
        }
        Ok(Self { tabular, rff, text })
    }

    pub fn output_dim(&self) -> usize {
        let tab = match (&self.tabular, &self.rff) {
            (_, Some(r)) => r.output_dim(),
            (Some(t), None) => t.output_dim(),
            (None, None) => 0,
        };
        tab + self.text.iter().map(|t| t.output_dim()).sum::<usize>()
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Array2<f64>> {
        let mut blocks = Vec::new();
        if let Some(t) = &self.tabular {
            let z = t.transform(dataset)?;
            blocks.push(match &self.rff {
                Some(r) => r.transform(&z)?,
                None => z,
            });
        }
        for t in &self.text {
            blocks.push(t.transform(dataset)?);
        }
        let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
        concatenate(Axis(1), &views).map_err(|e| Error::Invariant(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_two_moons, NamedColumn};

    #[test]
    fn tokenizer_splits_on_punctuation() {
        let toks: Vec<_> = tokenize("Hello, WORLD!! it's 2x").collect();
        assert_eq!(toks, vec!["hello", "world", "it", "s", "2x"]);
    }

    #[test]
    fn pipeline_dims_and_determinism() {
        let ds = make_two_moons(60, 0.2, 0.1, 1).unwrap();
        let opts = FeatureOptions {
            rff_components: Some(50),
            seed: 4,
        };
        let p = FeaturePipeline::fit(&ds, &opts).unwrap();
        let a = p.transform(&ds).unwrap();
        let b = p.transform(&ds).unwrap();
        assert_eq!(a.dim(), (60, 50));
        assert_eq!(a, b);
        let t = FeatureTransformer::Composite(p);
        let back = FeatureTransformer::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back.transform(&ds).unwrap(), a);
    }

    #[test]
    fn mixed_table() {
        let ds = Dataset::new(
            vec![
                NamedColumn {
                    name: "n".into(),
                    values: Column::Numeric(vec![1.0, 3.0]),
                },
                NamedColumn {
                    name: "t".into(),
                    values: Column::Text(vec!["a b".into(), "b".into()]),
                },
            ],
            vec![0, 1],
            None,
            2,
        )
        .unwrap();
        let p = FeaturePipeline::fit(
            &ds,
            &FeatureOptions {
                rff_components: None,
                seed: 0,
            },
        )
        .unwrap();
        let z = p.transform(&ds).unwrap();
        assert_eq!(z.dim(), (2, 3));
        assert_eq!(z[[0, 0]], -1.0);
        assert_eq!(z[[1, 0]], 1.0);
    }
}
