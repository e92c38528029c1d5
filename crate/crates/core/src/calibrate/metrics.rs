use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ECE_BINS: usize = 10;

fn bin_of(p: f64, bins: usize) -> usize {
    ((p * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Classwise expected calibration error: for each class, the bin-mass
/// weighted gap between the class frequency and the mean class confidence
/// over equal-width confidence bins, averaged over classes.
pub fn classwise_ece(probs: &Array2<f64>, true_labels: &[usize], bins: usize) -> f64 {
    assert!(bins >= 1, "at least one bin is required");
    assert_eq!(probs.nrows(), true_labels.len());
    let (n, c) = probs.dim();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for class in 0..c {
        let mut conf = vec![0.0; bins];
        let mut hits = vec![0.0; bins];
        let mut count = vec![0usize; bins];
        for (i, &y) in true_labels.iter().enumerate() {
            let p = probs[[i, class]];
            let b = bin_of(p, bins);
            conf[b] += p;
            hits[b] += f64::from(u8::from(y == class));
            count[b] += 1;
        }
        total += (0..bins)
            .filter(|&b| count[b] > 0)
            .map(|b| (hits[b] - conf[b]).abs() / n as f64)
            .sum::<f64>();
    }
    total / c as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub mean_confidence: f64,
    pub mean_accuracy: f64,
    pub mass: f64,
    pub count: usize,
}

/// Non-empty equal-width bins of the confidence in `class`.
pub fn reliability_bins(probs: &Array2<f64>, true_labels: &[usize], class: usize, bins: usize) -> Vec<ReliabilityBin> {
    assert!(bins >= 1, "at least one bin is required");
    assert_eq!(probs.nrows(), true_labels.len());
    let n = probs.nrows();
    let mut conf = vec![0.0; bins];
    let mut hits = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for (i, &y) in true_labels.iter().enumerate() {
        let p = probs[[i, class]];
        let b = bin_of(p, bins);
        conf[b] += p;
        hits[b] += f64::from(u8::from(y == class));
        count[b] += 1;
    }
    (0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| ReliabilityBin {
            lower: b as f64 / bins as f64,
            upper: (b + 1) as f64 / bins as f64,
            mean_confidence: conf[b] / count[b] as f64,
            mean_accuracy: hits[b] / count[b] as f64,
            mass: count[b] as f64 / n as f64,
            count: count[b],
        })
        .collect()
}

/// `class,lower,upper,mean_confidence,mean_accuracy,mass,count` rows.
pub fn write_reliability_csv(rows: &[(usize, ReliabilityBin)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("class,lower,upper,mean_confidence,mean_accuracy,mass,count\n");
    for (c, b) in rows {
        out.push_str(&format!(
            "{c},{},{},{},{},{},{}\n",
            b.lower, b.upper, b.mean_confidence, b.mean_accuracy, b.mass, b.count
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn one_hot_correct_is_zero() {
        let p = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(classwise_ece(&p, &[0, 1, 2], 10), 0.0);
    }

    #[test]
    fn base_rate_predictor_is_zero() {
        let p = Array2::from_elem((4, 2), 0.5);
        assert!(classwise_ece(&p, &[0, 1, 0, 1], 10).abs() < 1e-15);
    }

    #[test]
    fn constant_skewed_predictor() {
        let p = array![[0.9, 0.1], [0.9, 0.1], [0.9, 0.1], [0.9, 0.1]];
        assert!((classwise_ece(&p, &[0, 1, 0, 1], 10) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ece_in_unit_interval() {
        let p = array![[1.0, 0.0], [1.0, 0.0]];
        let e = classwise_ece(&p, &[1, 1], 5);
        assert!((0.0..=1.0).contains(&e));
        assert!((e - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_bin_and_masses() {
        let p = array![[0.42, 0.58], [0.44, 0.56], [0.41, 0.59]];
        let bins = reliability_bins(&p, &[0, 1, 1], 0, 10);
        assert_eq!(bins.len(), 1);
        assert_eq!(bins[0].mass, 1.0);
        assert!((bins[0].mean_accuracy - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn calibrated_generator_has_small_bin_gaps() {
        // y ~ Bernoulli(p) with p ~ U[0, 1]: confidence equals frequency.
        let mut rng = seeded(21);
        let n = 10_000;
        let mut p = Array2::zeros((n, 2));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let q: f64 = rng.random();
            p[[i, 1]] = q;
            p[[i, 0]] = 1.0 - q;
            y.push(usize::from(rng.random::<f64>() < q));
        }
        let bins = reliability_bins(&p, &y, 1, 10);
        assert_eq!(bins.len(), 10);
        assert!((bins.iter().map(|b| b.mass).sum::<f64>() - 1.0).abs() < 1e-12);
        for b in &bins {
            assert!((b.mean_confidence - b.mean_accuracy).abs() < 0.05, "{b:?}");
        }
    }
}
