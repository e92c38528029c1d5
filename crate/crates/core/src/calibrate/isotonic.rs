use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monotone piecewise-linear map fitted by isotonic regression.
/// Evaluation interpolates between breakpoints and clamps outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicMap {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl IsotonicMap {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        let v = &self.values;
        if x <= b[0] {
            return v[0];
        }
        let last = b.len() - 1;
        if x >= b[last] {
            return v[last];
        }
        // first breakpoint strictly greater than x
        let hi = b.partition_point(|&t| t <= x);
        let lo = hi - 1;
        let w = (x - b[lo]) / (b[hi] - b[lo]);
        v[lo] + w * (v[hi] - v[lo])
    }

    /// Fitted value at each input, in input order.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Least-squares non-decreasing fit of `outcomes` against `confidences`.
/// Pairs are sorted by confidence; equal confidences are pooled first.
pub fn fit_isotonic(confidences: &[f64], outcomes: &[f64]) -> Result<IsotonicMap> {
    if confidences.len() != outcomes.len() {
        return Err(Error::DimensionMismatch {
            expected: confidences.len(),
            found: outcomes.len(),
        });
    }
    if confidences.is_empty() {
        return Err(Error::data("isotonic regression needs at least one point"));
    }
    if confidences.iter().chain(outcomes).any(|v| !v.is_finite()) {
        return Err(Error::data("isotonic regression inputs must be finite"));
    }
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[a].total_cmp(&confidences[b]));

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for &i in &order {
        let x = confidences[i];
        match xs.last() {
            Some(&last) if last == x => {
                let k = ys.len() - 1;
                ys[k] += outcomes[i];
                ws[k] += 1.0;
            }
            _ => {
                xs.push(x);
                ys.push(outcomes[i]);
                ws.push(1.0);
            }
        }
    }
    for (y, w) in ys.iter_mut().zip(&ws) {
        *y /= w;
    }
    let values = pava(&ys, &ws);
    Ok(IsotonicMap {
        breakpoints: xs,
        values,
    })
}

/// Pool-adjacent-violators: weighted least-squares projection of `y` onto
/// non-decreasing sequences.
pub fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    // (weighted mean, weight, length) per block
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        let mut cur = (yi, wi, 1usize);
        while let Some(&(m, pw, len)) = blocks.last() {
            if m <= cur.0 {
                break;
            }
            blocks.pop();
            let tw = pw + cur.1;
            cur = ((m * pw + cur.0 * cur.1) / tw, tw, len + cur.2);
        }
        blocks.push(cur);
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, len)| std::iter::repeat_n(m, len))
        .collect()
}
