use ndarray::ArrayView1;
use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Flip probability independent of both class and features.
    Ncar,
    /// Flip probability depends on the true class.
    Nar,
    /// Flip probability depends on the features; only available through
    /// [`apply_feature_dependent_noise`].
    Nnar,
}

/// Column-stochastic matrix: `entries[observed][true]` is the probability of
/// observing class `observed` for an example of true class `true`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTransitionMatrix {
    entries: Vec<Vec<f64>>,
    kind: NoiseKind,
}

impl NoiseTransitionMatrix {
    pub fn new(entries: Vec<Vec<f64>>, kind: NoiseKind) -> Result<Self> {
        let c = entries.len();
        if c < 2 {
            return Err(Error::config("transition matrix needs at least 2 classes"));
        }
        if entries.iter().any(|row| row.len() != c) {
            return Err(Error::config("transition matrix must be square"));
        }
        for row in &entries {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::config("transition probabilities must lie in [0, 1]"));
            }
        }
        for t in 0..c {
            let s: f64 = entries.iter().map(|row| row[t]).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::config(format!(
                    "column {t} of the transition matrix sums to {s}, expected 1"
                )));
            }
        }
        Ok(Self { entries, kind })
    }

    pub fn identity(n_classes: usize) -> Self {
        let entries = (0..n_classes)
            .map(|i| (0..n_classes).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            entries,
            kind: NoiseKind::Ncar,
        }
    }

    /// Each label flips with probability `rate`, uniformly to one of the
    /// other classes.
    pub fn uniform(n_classes: usize, rate: f64) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::config("uniform noise needs at least 2 classes"));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::config(format!("noise rate {rate} outside [0, 1]")));
        }
        let off = rate / (n_classes - 1) as f64;
        let entries = (0..n_classes)
            .map(|i| (0..n_classes).map(|j| if i == j { 1.0 - rate } else { off }).collect())
            .collect();
        Ok(Self {
            entries,
            kind: NoiseKind::Ncar,
        })
    }

    /// Class-dependent flip rates, each flip uniform over the other classes.
    pub fn per_class(rates: &[f64]) -> Result<Self> {
        let c = rates.len();
        let mut entries = vec![vec![0.0; c]; c];
        for (t, &r) in rates.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config(format!("noise rate {r} outside [0, 1]")));
            }
            for (o, row) in entries.iter_mut().enumerate() {
                row[t] = if o == t { 1.0 - r } else { r / (c - 1) as f64 };
            }
        }
        Self::new(entries, NoiseKind::Nar)
    }

    pub fn n_classes(&self) -> usize {
        self.entries.len()
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn entry(&self, observed: usize, true_class: usize) -> f64 {
        self.entries[observed][true_class]
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Distribution of the observed label for true class `c`.
    pub fn column(&self, c: usize) -> Vec<f64> {
        self.entries.iter().map(|row| row[c]).collect()
    }

    /// Expected fraction of flipped labels under the given true-class priors.
    pub fn noise_ratio(&self, priors: &[f64]) -> f64 {
        priors
            .iter()
            .enumerate()
            .map(|(c, p)| p * (1.0 - self.entries[c][c]))
            .sum()
    }

    fn draw(&self, true_class: usize, rng: &mut Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (o, row) in self.entries.iter().enumerate() {
            acc += row[true_class];
            if u < acc {
                return o;
            }
        }
        // rounding left u above the cumulative sum; take the last class with mass
        (0..self.n_classes())
            .rev()
            .find(|&o| self.entries[o][true_class] > 0.0)
            .unwrap_or(true_class)
    }
}

/// Draws each observed label independently from column `true_class` of `t`.
/// The current labels of `dataset` are the ground truth.
pub fn apply_transition_noise(dataset: &Dataset, t: &NoiseTransitionMatrix, seed: u64) -> Result<Dataset> {
    if t.n_classes() != dataset.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_classes(),
            found: t.n_classes(),
        });
    }
    let ds = dataset.with_truth();
    let mut rng = seeded(seed);
    let observed = ds.truth_or_observed().iter().map(|&c| t.draw(c, &mut rng)).collect();
    ds.with_observed_labels(observed)
}

/// Feature-dependent corruption: `transition` maps each feature row to the
/// matrix used for that example.
pub fn apply_feature_dependent_noise<F>(dataset: &Dataset, transition: F, seed: u64) -> Result<Dataset>
where
    F: Fn(ArrayView1<'_, f64>) -> NoiseTransitionMatrix,
{
    let x = dataset.numeric_matrix()?;
    let ds = dataset.with_truth();
    let mut rng = seeded(seed);
    let mut observed = Vec::with_capacity(ds.n());
    for (row, &c) in x.rows().into_iter().zip(ds.truth_or_observed()) {
        let t = transition(row);
        if t.n_classes() != ds.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: ds.n_classes(),
                found: t.n_classes(),
            });
        }
        observed.push(t.draw(c, &mut rng));
    }
    ds.with_observed_labels(observed)
}

/// Flips exactly `per_class_count` labels of every true class, chosen
/// uniformly without replacement, each to a uniformly drawn other class.
pub fn flip_labels(dataset: &Dataset, per_class_count: usize, seed: u64) -> Result<Dataset> {
    let ds = dataset.with_truth();
    let truth = ds.truth_or_observed().to_vec();
    let c = ds.n_classes();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &y) in truth.iter().enumerate() {
        members[y].push(i);
    }
    if let Some((class, m)) = members.iter().enumerate().find(|(_, m)| m.len() < per_class_count) {
        return Err(Error::config(format!(
            "cannot flip {per_class_count} labels of class {class}, which has {} examples",
            m.len()
        )));
    }
    let mut rng = seeded(seed);
    let mut observed = ds.observed_labels().to_vec();
    for (class, m) in members.iter().enumerate() {
        for k in sample(&mut rng, m.len(), per_class_count).into_iter() {
            let shift = rng.random_range(1..c);
            observed[m[k]] = (class + shift) % c;
        }
    }
    ds.with_observed_labels(observed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_two_moons;
    use ndarray::Array2;

    fn toy(n: usize, c: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let y = (0..n).map(|i| i % c).collect();
        Dataset::from_matrix(&x, y, None, c).unwrap()
    }

    #[test]
    fn matrix_validation() {
        assert!(NoiseTransitionMatrix::new(vec![vec![0.9, 0.2], vec![0.1, 0.8]], NoiseKind::Nar).is_ok());
        assert!(NoiseTransitionMatrix::new(vec![vec![0.9, 0.2], vec![0.2, 0.8]], NoiseKind::Nar).is_err());
        assert!(NoiseTransitionMatrix::new(vec![vec![1.5, 0.0], vec![-0.5, 1.0]], NoiseKind::Nar).is_err());
        let t = NoiseTransitionMatrix::uniform(3, 0.3).unwrap();
        assert!((t.noise_ratio(&[0.2, 0.3, 0.5]) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn identity_noise_is_noop() {
        let ds = toy(50, 3);
        let out = apply_transition_noise(&ds, &NoiseTransitionMatrix::identity(3), 4).unwrap();
        assert_eq!(out.observed_labels(), ds.observed_labels());
        assert!(out.mislabel_mask().unwrap().iter().all(|&m| !m));
    }

    #[test]
    fn deterministic_column_relabels_everything() {
        let ds = toy(40, 2);
        let t = NoiseTransitionMatrix::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], NoiseKind::Nar).unwrap();
        let out = apply_transition_noise(&ds, &t, 1).unwrap();
        let mask = out.mislabel_mask().unwrap();
        for (i, &y) in ds.observed_labels().iter().enumerate() {
            assert_eq!(mask[i], y == 0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let ds = toy(10, 2);
        let t = NoiseTransitionMatrix::uniform(3, 0.1).unwrap();
        assert!(matches!(
            apply_transition_noise(&ds, &t, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn uniform_flip_rate_over_seeds() {
        // Binomial(10000, 0.25) has sd ~0.0043 per seed, so the pooled
        // estimate over 20 seeds should sit well inside +-0.02.
        let ds = toy(10_000, 2);
        let t = NoiseTransitionMatrix::uniform(2, 0.25).unwrap();
        let mut total = 0.0;
        for seed in 0..20 {
            let out = apply_transition_noise(&ds, &t, seed).unwrap();
            let frac = out.n_mislabeled().unwrap() as f64 / 10_000.0;
            assert!((frac - 0.25).abs() < 0.02, "seed {seed}: {frac}");
            total += frac;
        }
        assert!((total / 20.0 - 0.25).abs() < 0.01);
    }

    #[test]
    fn flip_counts_per_class() {
        let ds = make_two_moons(100, 0.1, 0.1, 0).unwrap();
        let out = flip_labels(&ds, 5, 11).unwrap();
        let mask = out.mislabel_mask().unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 10);
        let truth = out.true_labels().unwrap();
        for class in 0..2 {
            let k = (0..100).filter(|&i| mask[i] && truth[i] == class).count();
            assert_eq!(k, 5);
        }
        assert_eq!(out.true_labels(), ds.true_labels());
    }

    #[test]
    fn flip_zero_is_identity() {
        let ds = make_two_moons(100, 0.1, 0.1, 0).unwrap();
        let out = flip_labels(&ds, 0, 3).unwrap();
        assert_eq!(out, ds);
    }

    #[test]
    fn flip_three_classes_is_deterministic() {
        let ds = toy(30, 3);
        let a = flip_labels(&ds, 1, 5).unwrap();
        let b = flip_labels(&ds, 1, 5).unwrap();
        assert_eq!(a, b);
        let mask = a.mislabel_mask().unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 3);
        assert!(flip_labels(&ds, 11, 5).is_err());
    }

    #[test]
    fn feature_dependent_noise() {
        let ds = toy(20, 2);
        // rows with x >= 10 always flip, others never
        let out = apply_feature_dependent_noise(
            &ds,
            |row| {
                if row[0] >= 10.0 {
                    NoiseTransitionMatrix::uniform(2, 1.0).unwrap()
                } else {
                    NoiseTransitionMatrix::identity(2)
                }
            },
            0,
        )
        .unwrap();
        let mask = out.mislabel_mask().unwrap();
        for (i, m) in mask.iter().enumerate() {
            assert_eq!(*m, i >= 10);
        }
    }
}
