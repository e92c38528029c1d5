use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// Fraction of the whole set held out before the calibration split.
    pub validation_fraction: f64,
    /// Share of the held-out validation part reserved for calibration.
    pub calibration_fraction_of_validation: f64,
    /// Zero when a test set is supplied separately.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            validation_fraction: 0.2,
            calibration_fraction_of_validation: 0.5,
            test_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_test(train: f64, validation: f64, test: f64, seed: u64) -> Self {
        Self {
            train_fraction: train,
            validation_fraction: validation,
            calibration_fraction_of_validation: 0.5,
            test_fraction: test,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let parts = [
            self.train_fraction,
            self.validation_fraction,
            self.calibration_fraction_of_validation,
            self.test_fraction,
        ];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::config("split fractions must lie in [0, 1]"));
        }
        let total = self.train_fraction + self.validation_fraction + self.test_fraction;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "train, validation and test fractions sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Disjoint row-index sets, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SplitParts {
    pub train: Dataset,
    pub validation: Option<Dataset>,
    pub calibration: Option<Dataset>,
    pub test: Option<Dataset>,
    pub indices: SplitIndices,
    pub warnings: Vec<String>,
}

/// Stratified split by observed label.
///
/// Rows are shuffled within each class and merged into one sequence ordered
/// by within-class quantile, so any contiguous run holds every class in
/// proportion to within one example. Parts are consecutive runs of that
/// sequence; small classes therefore spread round-robin.
pub fn split_dataset(dataset: &Dataset, spec: &SplitSpec) -> Result<SplitParts> {
    spec.validate()?;
    let n = dataset.n();
    let n_heldout = (n as f64 * spec.validation_fraction).round() as usize;
    let n_cal = (n_heldout as f64 * spec.calibration_fraction_of_validation).round() as usize;
    let n_val = n_heldout - n_cal;
    let n_test = (n as f64 * spec.test_fraction).round() as usize;
    if n_heldout + n_test >= n {
        return Err(Error::config("split leaves no training examples"));
    }
    let n_train = n - n_heldout - n_test;

    let requested = [
        (
            "validation",
            n_val,
            spec.validation_fraction > 0.0 && spec.calibration_fraction_of_validation < 1.0,
        ),
        (
            "calibration",
            n_cal,
            spec.validation_fraction > 0.0 && spec.calibration_fraction_of_validation > 0.0,
        ),
        ("test", n_test, spec.test_fraction > 0.0),
    ];
    for (name, size, wanted) in requested {
        if wanted && size == 0 {
            return Err(Error::config(format!("{name} part receives zero examples")));
        }
    }

    let order = stratified_order(dataset.observed_labels(), dataset.n_classes(), spec.seed);
    let mut cursor = 0;
    let mut take = |k: usize| {
        let mut part = order[cursor..cursor + k].to_vec();
        part.sort_unstable();
        cursor += k;
        part
    };
    let indices = SplitIndices {
        validation: take(n_val),
        calibration: take(n_cal),
        test: take(n_test),
        train: take(n_train),
    };

    let mut warnings = Vec::new();
    let present: Vec<bool> = dataset.class_counts().iter().map(|&k| k > 0).collect();
    for (name, part) in [
        ("train", &indices.train),
        ("validation", &indices.validation),
        ("calibration", &indices.calibration),
        ("test", &indices.test),
    ] {
        if part.is_empty() {
            continue;
        }
        let mut seen = vec![false; dataset.n_classes()];
        for &i in part {
            seen[dataset.observed_labels()[i]] = true;
        }
        for (c, (&p, &s)) in present.iter().zip(&seen).enumerate() {
            if p && !s {
                let msg = format!("{name} part has no example of class {c}");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let materialize = |idx: &[usize]| -> Result<Option<Dataset>> {
        if idx.is_empty() {
            Ok(None)
        } else {
            dataset.subset(idx).map(Some)
        }
    };
    Ok(SplitParts {
        train: dataset.subset(&indices.train)?,
        validation: materialize(&indices.validation)?,
        calibration: materialize(&indices.calibration)?,
        test: materialize(&indices.test)?,
        indices,
        warnings,
    })
}

pub(crate) fn stratified_order(labels: &[usize], n_classes: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(labels.len());
    for (c, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng);
        let len = m.len() as f64;
        for (k, &i) in m.iter().enumerate() {
            keyed.push(((k as f64 + 0.5) / len, c, i));
        }
    }
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn imbalanced(n: usize, minority: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let y = (0..n).map(|i| usize::from(i >= minority)).collect();
        Dataset::from_matrix(&x, y, None, 2).unwrap()
    }

    #[test]
    fn paper_protocol_sizes() {
        let ds = imbalanced(100, 10);
        let parts = split_dataset(&ds, &SplitSpec::default()).unwrap();
        assert_eq!(parts.indices.validation.len(), 10);
        assert_eq!(parts.indices.calibration.len(), 10);
        assert_eq!(parts.indices.train.len(), 80);
        assert!(parts.test.is_none());
    }

    #[test]
    fn stratification_within_one_example() {
        let ds = imbalanced(100, 10);
        let spec = SplitSpec::with_test(0.6, 0.2, 0.2, 17);
        let parts = split_dataset(&ds, &spec).unwrap();
        for part in [
            &parts.indices.train,
            &parts.indices.validation,
            &parts.indices.calibration,
            &parts.indices.test,
        ] {
            let minority = part.iter().filter(|&&i| i < 10).count() as f64;
            let expected = part.len() as f64 * 0.1;
            assert!((minority - expected).abs() <= 1.0, "{minority} vs {expected}");
        }
    }

    #[test]
    fn errors_and_warnings() {
        let ds = imbalanced(10, 1);
        let spec = SplitSpec {
            validation_fraction: 0.04,
            train_fraction: 0.96,
            ..Default::default()
        };
        assert!(split_dataset(&ds, &spec).is_err());
        let bad = SplitSpec {
            train_fraction: 0.5,
            ..Default::default()
        };
        assert!(split_dataset(&ds, &bad).is_err());
        let parts = split_dataset(&ds, &SplitSpec::default()).unwrap();
        assert!(!parts.warnings.is_empty());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 20usize..200, minority in 1usize..10, seed in any::<u64>()) {
            let ds = imbalanced(n, minority);
            let spec = SplitSpec::with_test(0.6, 0.2, 0.2, seed);
            let parts = split_dataset(&ds, &spec).unwrap();
            let mut all: Vec<usize> = parts.indices.train.iter()
                .chain(&parts.indices.validation)
                .chain(&parts.indices.calibration)
                .chain(&parts.indices.test)
                .copied()
                .collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let again = split_dataset(&ds, &spec).unwrap();
            prop_assert_eq!(again.indices, parts.indices);
        }
    }
}
