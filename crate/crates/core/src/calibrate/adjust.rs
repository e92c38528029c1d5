use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustOutput {
    pub probs: Array2<f64>,
    /// Mean confidence of class `j` over examples labeled `j` (0 when the
    /// class has no examples).
    pub class_means: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Class-mean centering followed by row normalisation:
/// `p~_j(x) = p_j(x) - pbar_j + max_c pbar_c`, negatives clamped to 0, then
/// each row divided by its sum (uniform when the sum is not positive).
pub fn adjust_confidences(probs: &Array2<f64>, labels: &[usize]) -> Result<AdjustOutput> {
    let (n, c) = probs.dim();
    if n != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::data(format!("label {bad} outside [0, {c})")));
    }
    let mut sums = vec![0.0; c];
    let mut counts = vec![0usize; c];
    for (i, &y) in labels.iter().enumerate() {
        sums[y] += probs[[i, y]];
        counts[y] += 1;
    }
    let mut warnings = Vec::new();
    let class_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(j, (&s, &k))| {
            if k == 0 {
                let msg = format!("class {j} absent from labels; its mean confidence is taken as 0");
                log::debug!("{msg}");
                warnings.push(msg);
                0.0
            } else {
                s / k as f64
            }
        })
        .collect();
    let top = class_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifts: Vec<f64> = class_means.iter().map(|m| top - m).collect();
    // All means equal: centering is the identity on normalised rows.
    if shifts.iter().all(|&s| s == 0.0) {
        return Ok(AdjustOutput {
            probs: probs.clone(),
            class_means,
            warnings,
        });
    }
    let mut out = probs.clone();
    let uniform = 1.0 / c as f64;
    for mut row in out.rows_mut() {
        for (v, s) in row.iter_mut().zip(&shifts) {
            *v = (*v + s).max(0.0);
        }
        let z = row.sum();
        if z > 0.0 {
            row /= z;
        } else {
            row.fill(uniform);
        }
    }
    Ok(AdjustOutput {
        probs: out,
        class_means,
        warnings,
    })
}
