use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-10;
const MIN_STEP: f64 = 1e-10;
const HESSIAN_RIDGE: f64 = 1e-12;

/// `p(s) = 1 / (1 + exp(a s + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattMap {
    pub a: f64,
    pub b: f64,
}

impl PlattMap {
    pub fn eval(&self, score: f64) -> f64 {
        let z = self.a * score + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Smoothed targets `(N+ + 1)/(N+ + 2)` for positives and `1/(N- + 2)` for
/// negatives.
pub fn platt_targets(outcomes: &[bool]) -> Vec<f64> {
    let pos = outcomes.iter().filter(|&&o| o).count() as f64;
    let neg = outcomes.len() as f64 - pos;
    let hi = (pos + 1.0) / (pos + 2.0);
    let lo = 1.0 / (neg + 2.0);
    outcomes.iter().map(|&o| if o { hi } else { lo }).collect()
}

/// Cross-entropy of the sigmoid against `targets`, computed without overflow.
pub fn platt_objective(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let z = a * s + b;
            if z >= 0.0 {
                t * z + (-z).exp().ln_1p()
            } else {
                (t - 1.0) * z + z.exp().ln_1p()
            }
        })
        .sum()
}

/// Damped Newton minimisation of [`platt_objective`] with backtracking line
/// search. Stops when the gradient norm drops below 1e-8 or after 100
/// iterations.
pub fn fit_platt(scores: &[f64], outcomes: &[bool]) -> Result<PlattMap> {
    if scores.len() != outcomes.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: outcomes.len(),
        });
    }
    if scores.len() < 2 {
        return Err(Error::data("Platt scaling needs at least two points"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::data("Platt scaling scores must be finite"));
    }
    let pos = outcomes.iter().filter(|&&o| o).count();
    if pos == 0 || pos == outcomes.len() {
        return Err(Error::data("Platt scaling needs both outcome classes"));
    }
    let targets = platt_targets(outcomes);

    // Only a*s + b is identifiable when every score is equal.
    if scores.iter().all(|&s| s == scores[0]) {
        let mean = targets.iter().sum::<f64>() / targets.len() as f64;
        return Ok(PlattMap {
            a: 0.0,
            b: ((1.0 - mean) / mean).ln(),
        });
    }

    let neg = (outcomes.len() - pos) as f64;
    let mut a = 0.0;
    let mut b = ((neg + 1.0) / (pos as f64 + 1.0)).ln();
    let mut fval = platt_objective(scores, &targets, a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21) = (HESSIAN_RIDGE, HESSIAN_RIDGE, 0.0);
        let (mut g1, mut g2) = (0.0, 0.0);
        for (&s, &t) in scores.iter().zip(&targets) {
            let z = a * s + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += s * s * d2;
            h22 += d2;
            h21 += s * d2;
            let d1 = t - p;
            g1 += s * d1;
            g2 += d1;
        }
        if (g1 * g1 + g2 * g2).sqrt() < GRAD_TOL {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_objective(scores, &targets, na, nb);
            // slack lets Newton finish once objective changes drop below rounding
            if nf <= fval + 1e-4 * step * gd + 4.0 * f64::EPSILON * fval.abs() {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            log::debug!("Platt line search stalled at a={a}, b={b}");
            break;
        }
    }
    Ok(PlattMap { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair() {
        let m = fit_platt(&[-1.0, 1.0], &[false, true]).unwrap();
        assert!(m.b.abs() < 1e-9);
        assert!(m.a < 0.0);
        // targets 1/3 and 2/3 are matched exactly
        assert!((m.eval(1.0) - 2.0 / 3.0).abs() < 1e-9);
        assert!((m.a + 2f64.ln()).abs() < 1e-9, "{m:?}");
    }

    #[test]
    fn equal_scores_give_smoothed_base_rate() {
        let outcomes = [true, false, false, false];
        let m = fit_platt(&[0.3; 4], &outcomes).unwrap();
        let t = platt_targets(&outcomes);
        let base = t.iter().sum::<f64>() / 4.0;
        assert!((m.eval(0.3) - base).abs() < 1e-12);
        assert!((m.eval(-7.0) - base).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(fit_platt(&[0.0, 1.0], &[true, true]).is_err());
        assert!(fit_platt(&[0.0], &[true]).is_err());
        assert!(fit_platt(&[0.0, 1.0], &[true]).is_err());
    }

    #[test]
    fn output_in_open_unit_interval() {
        let m = PlattMap { a: -3.0, b: 0.5 };
        for s in [-100.0, -1.0, 0.0, 1.0, 100.0] {
            let p = m.eval(s);
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(m.eval(1.0) > 0.0 && m.eval(1.0) < 1.0);
    }
}
