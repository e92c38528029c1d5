use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use super::{Column, Dataset};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Condition under which a labeling rule fires. Column indices refer to the
/// dataset's raw columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Predicate {
    /// `feature[column] >= threshold`
    AtLeast { column: usize, threshold: f64 },
    /// `feature[column] < threshold`
    Below { column: usize, threshold: f64 },
    /// Lowercased token present in a text or categorical column.
    ContainsToken { column: usize, token: String },
}

/// A heuristic that emits `label` when its predicate holds and abstains
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingRule {
    pub predicate: Predicate,
    pub label: usize,
}

impl LabelingRule {
    pub fn new(predicate: Predicate, label: usize) -> Self {
        Self { predicate, label }
    }

    fn fires(&self, dataset: &Dataset, row: usize) -> Result<bool> {
        let col_idx = match &self.predicate {
            Predicate::AtLeast { column, .. }
            | Predicate::Below { column, .. }
            | Predicate::ContainsToken { column, .. } => *column,
        };
        let col = dataset
            .columns()
            .get(col_idx)
            .ok_or_else(|| Error::config(format!("rule refers to missing column {col_idx}")))?;
        match (&self.predicate, &col.values) {
            (Predicate::AtLeast { threshold, .. }, Column::Numeric(v)) => Ok(v[row] >= *threshold),
            (Predicate::Below { threshold, .. }, Column::Numeric(v)) => Ok(v[row] < *threshold),
            (Predicate::ContainsToken { token, .. }, Column::Text(v) | Column::Categorical(v)) => {
                let token = token.to_lowercase();
                Ok(crate::features::tokenize(&v[row]).any(|t| t == token))
            }
            _ => Err(Error::config(format!(
                "rule predicate does not match the type of column `{}`",
                col.name
            ))),
        }
    }
}

/// Resolution of ties and all-abstain rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TieBreak {
    /// Uniform draw among the tied classes (all classes when every rule
    /// abstains).
    Random { seed: u64 },
    /// The most frequent decisively-voted class; when no row is decisive,
    /// the most frequent current label of the dataset.
    GlobalMajority,
}

/// Per-row vote counts, `votes[i][c]` = number of rules voting `c` on row `i`.
pub fn rule_votes(dataset: &Dataset, rules: &[LabelingRule]) -> Result<Vec<Vec<usize>>> {
    let c = dataset.n_classes();
    if let Some(r) = rules.iter().find(|r| r.label >= c) {
        return Err(Error::config(format!("rule label {} outside [0, {c})", r.label)));
    }
    (0..dataset.n())
        .map(|i| {
            let mut v = vec![0usize; c];
            for r in rules {
                if r.fires(dataset, i)? {
                    v[r.label] += 1;
                }
            }
            Ok(v)
        })
        .collect()
}

/// Majority vote of the firing rules becomes the observed label; the
/// dataset's current labels are kept as ground truth.
pub fn aggregate_rules(dataset: &Dataset, rules: &[LabelingRule], fallback: TieBreak) -> Result<Dataset> {
    if rules.is_empty() {
        return Err(Error::config("at least one labeling rule is required"));
    }
    let votes = rule_votes(dataset, rules)?;
    let c = dataset.n_classes();
    let leaders: Vec<Vec<usize>> = votes
        .iter()
        .map(|v| {
            let best = *v.iter().max().unwrap();
            if best == 0 {
                Vec::new()
            } else {
                (0..c).filter(|&k| v[k] == best).collect()
            }
        })
        .collect();

    let observed = match fallback {
        TieBreak::GlobalMajority => {
            let mut decisive = vec![0usize; c];
            for l in leaders.iter().filter(|l| l.len() == 1) {
                decisive[l[0]] += 1;
            }
            let majority = if decisive.iter().any(|&k| k > 0) {
                argmax_count(&decisive)
            } else {
                argmax_count(&dataset.class_counts())
            };
            leaders
                .iter()
                .map(|l| if l.len() == 1 { l[0] } else { majority })
                .collect()
        }
        TieBreak::Random { seed } => {
            let mut rng = seeded(seed);
            let all: Vec<usize> = (0..c).collect();
            leaders
                .iter()
                .map(|l| match l.len() {
                    1 => l[0],
                    0 => *all.choose(&mut rng).unwrap(),
                    _ => *l.choose(&mut rng).unwrap(),
                })
                .collect()
        }
    };
    dataset.with_truth().with_observed_labels(observed)
}

/// Index of the largest count, lowest index on ties.
fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &v) in counts.iter().enumerate() {
        if v > counts[best] {
            best = k;
        }
    }
    best
}
