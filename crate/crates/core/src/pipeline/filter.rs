use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::detect::TrustScores;
use crate::error::{Error, Result};

/// Absorbs representation error in `q * n` (0.3 * 10 is 2.9999...).
const FLOOR_SLACK: f64 = 1e-9;

/// The filtering quantiles swept by the benchmark.
pub const QUANTILE_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Number of examples removed at quantile `q`.
pub fn removal_count(n: usize, q: f64) -> usize {
    ((q * n as f64 + FLOOR_SLACK).floor() as usize).min(n)
}

/// Indices (ascending) surviving removal of the `floor(q n)` least trusted
/// examples; ties at the cutoff remove the lower index first.
pub fn filter_indices(scores: &[f64], q: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::config(format!("filter quantile {q} outside [0, 1)")));
    }
    let n = scores.len();
    let k = removal_count(n, q);
    if k >= n {
        return Err(Error::data("filtering would remove every example"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut keep = order.split_off(k);
    keep.sort_unstable();
    Ok(keep)
}

pub fn filter_by_trust(dataset: &Dataset, scores: &TrustScores, q: f64) -> Result<Dataset> {
    if scores.len() != dataset.n() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n(),
            found: scores.len(),
        });
    }
    dataset.subset(&filter_indices(scores.scores(), q)?)
}

/// Fraction of removed examples against fraction of minority examples
/// removed, sweeping from the least trusted example upwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorityCurve {
    /// `(k/n, removed minority / total minority)` for `k = 0..=n`.
    pub points: Vec<(f64, f64)>,
    /// Trapezoid integral of `y - x` over `[0, 1]`; positive when minority
    /// examples are removed faster than the rest.
    pub area_above_diagonal: f64,
    pub minority_classes: Vec<usize>,
    /// False when every class has prior at least `1/C`; the curve is then
    /// empty.
    pub has_minority: bool,
}

/// Minority classes are those whose prior in `labels` is below `1/C`.
pub fn minority_removal_curve(scores: &TrustScores, labels: &[usize], n_classes: usize) -> Result<MinorityCurve> {
    let n = labels.len();
    if scores.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: scores.len(),
        });
    }
    if n == 0 || n_classes < 2 {
        return Err(Error::data("minority curve needs examples and at least two classes"));
    }
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        if y >= n_classes {
            return Err(Error::data(format!("label {y} outside [0, {n_classes})")));
        }
        counts[y] += 1;
    }
    // prior < 1/C  <=>  count * C < n
    let minority_classes: Vec<usize> = (0..n_classes).filter(|&c| counts[c] * n_classes < n).collect();
    let is_minority: Vec<bool> = labels.iter().map(|y| minority_classes.contains(y)).collect();
    let total_minority = is_minority.iter().filter(|&&m| m).count();
    if total_minority == 0 {
        return Ok(MinorityCurve {
            points: Vec::new(),
            area_above_diagonal: 0.0,
            minority_classes,
            has_minority: false,
        });
    }
    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    let mut removed = 0usize;
    for (k, i) in scores.ascending_order().into_iter().enumerate() {
        removed += usize::from(is_minority[i]);
        points.push(((k + 1) as f64 / n as f64, removed as f64 / total_minority as f64));
    }
    let area = points
        .windows(2)
        .map(|w| {
            let (x0, y0) = w[0];
            let (x1, y1) = w[1];
            (x1 - x0) * ((y0 - x0) + (y1 - x1)) / 2.0
        })
        .sum();
    Ok(MinorityCurve {
        points,
        area_above_diagonal: area,
        minority_classes,
        has_minority: true,
    })
}
