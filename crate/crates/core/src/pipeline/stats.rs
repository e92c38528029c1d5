use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Above this many non-zero differences the normal approximation is used.
pub const EXACT_WILCOXON_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// `a - b` tends to be positive.
    Greater,
    /// `a - b` tends to be negative.
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)` for the two-sided test, `W+` otherwise.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    pub significant: bool,
    pub alternative: Alternative,
    /// Pairs left after dropping zero differences.
    pub n_nonzero: usize,
    pub exact: bool,
    /// Pairs with `a > b`, `a == b` and `a < b`.
    pub greater: usize,
    pub equal: usize,
    pub less: usize,
}

impl WilcoxonResult {
    /// Wins, draws and losses of `a` against `b`.
    pub fn wins_draws_losses(&self, lower_is_better: bool) -> (usize, usize, usize) {
        if lower_is_better {
            (self.less, self.equal, self.greater)
        } else {
            (self.greater, self.equal, self.less)
        }
    }
}

/// Two-sided signed-rank test; `alpha` is the confidence level (0.95 means
/// significant when p < 0.05).
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alpha: f64) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, alpha, Alternative::TwoSided)
}

pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], alpha: f64, alternative: Alternative) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::data("Wilcoxon test needs at least one pair"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("confidence level {alpha} outside (0, 1)")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::data("Wilcoxon test needs finite values"));
    }
    let (mut greater, mut equal, mut less) = (0, 0, 0);
    let mut diffs = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        if x > y {
            greater += 1;
        } else if x < y {
            less += 1;
        } else {
            equal += 1;
        }
        let d = x - y;
        if d != 0.0 {
            diffs.push(d);
        }
    }
    let n = diffs.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            significant: false,
            alternative,
            n_nonzero: 0,
            exact: true,
            greater,
            equal,
            less,
        });
    }

    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = n as f64 * (n as f64 + 1.0) / 2.0;
    let w_minus = total - w_plus;

    let exact = n <= EXACT_WILCOXON_MAX_N;
    let (p_low, p_high) = if exact {
        exact_tails(&ranks, w_plus)
    } else {
        normal_tails(&ranks, w_plus)
    };
    let p_value = match alternative {
        Alternative::TwoSided => (2.0 * p_low.min(p_high)).min(1.0),
        Alternative::Greater => p_high,
        Alternative::Less => p_low,
    };
    let statistic = match alternative {
        Alternative::TwoSided => w_plus.min(w_minus),
        _ => w_plus,
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus,
        w_minus,
        p_value,
        significant: p_value < 1.0 - alpha,
        alternative,
        n_nonzero: n,
        exact,
        greater,
        equal,
        less,
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// `(P(W+ <= w), P(W+ >= w))` under the null of symmetric signs, counting
/// the 2^n sign assignments by dynamic programming over doubled ranks
/// (average ranks are multiples of 1/2).
fn exact_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        reach += r;
        for s in (r..=reach).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let w = (2.0 * w_plus).round() as usize;
    let low: f64 = counts[..=w].iter().sum();
    let high: f64 = counts[w..].iter().sum();
    (low / total, high / total)
}

fn normal_tails(ranks: &[f64], w_plus: f64) -> (f64, f64) {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return (1.0, 1.0);
    }
    let sd = var.sqrt();
    let normal = Normal::standard();
    // continuity correction towards the mean on each tail
    let low = normal.cdf((w_plus - mean + 0.5) / sd);
    let high = 1.0 - normal.cdf((w_plus - mean - 0.5) / sd);
    (low.min(1.0), high.min(1.0))
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::data("correlation needs at least two pairs"));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::data("correlation undefined for a constant sample"));
    }
    Ok(sab / (saa * sbb).sqrt())
}
