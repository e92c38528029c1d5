//! Post-hoc calibration of confidence models (isotonic regression, Platt
//! scaling), the class-mean adjustment competitor, and calibration metrics.

mod adjust;
mod isotonic;
mod metrics;
mod platt;

pub use adjust::{adjust_confidences, AdjustOutput};
pub use isotonic::{fit_isotonic, pava, IsotonicMap};
pub use metrics::{classwise_ece, reliability_bins, write_reliability_csv, ReliabilityBin, DEFAULT_ECE_BINS};
pub use platt::{fit_platt, platt_objective, platt_targets, PlattMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{ConfidenceModel, LOG_LOSS_CLIP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationMethod {
    Isotonic,
    Sigmoid,
}

/// One-vs-rest map applied to a single class confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CalibrationMap {
    Identity,
    Isotonic(IsotonicMap),
    /// Platt scaling on the confidence logit `ln(p / (1 - p))`.
    Sigmoid(PlattMap),
}

impl CalibrationMap {
    pub fn apply(&self, p: f64) -> f64 {
        match self {
            CalibrationMap::Identity => p,
            CalibrationMap::Isotonic(m) => m.eval(p),
            CalibrationMap::Sigmoid(m) => m.eval(logit(p)),
        }
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    let p = p.clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP);
    (p / (1.0 - p)).ln()
}

/// Per-class maps fitted on a calibration set, followed by renormalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClasswiseCalibrator {
    pub method: CalibrationMethod,
    pub maps: Vec<CalibrationMap>,
    /// Classes that fell back to the identity map.
    pub warnings: Vec<String>,
}

impl ClasswiseCalibrator {
    /// Fits class `c`'s map on `(probs[:, c], 1[y == c])`. Classes without
    /// both positive and negative calibration examples keep the identity.
    pub fn fit(probs: &Array2<f64>, y: &[usize], method: CalibrationMethod) -> Result<Self> {
        if probs.nrows() == 0 {
            return Err(Error::data("calibration set is empty"));
        }
        if probs.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: probs.nrows(),
                found: y.len(),
            });
        }
        let n_classes = probs.ncols();
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::data(format!("calibration label {bad} outside [0, {n_classes})")));
        }
        let mut maps = Vec::with_capacity(n_classes);
        let mut warnings = Vec::new();
        for c in 0..n_classes {
            let outcomes: Vec<bool> = y.iter().map(|&k| k == c).collect();
            let pos = outcomes.iter().filter(|&&o| o).count();
            if pos == 0 || pos == outcomes.len() {
                let msg = format!(
                    "class {c} has {} calibration examples; using identity map",
                    if pos == 0 { "no positive" } else { "no negative" }
                );
                log::debug!("{msg}");
                warnings.push(msg);
                maps.push(CalibrationMap::Identity);
                continue;
            }
            let col = probs.column(c);
            let map = match method {
                CalibrationMethod::Isotonic => {
                    let conf: Vec<f64> = col.to_vec();
                    let out: Vec<f64> = outcomes.iter().map(|&o| f64::from(u8::from(o))).collect();
                    CalibrationMap::Isotonic(fit_isotonic(&conf, &out)?)
                }
                CalibrationMethod::Sigmoid => {
                    let scores: Vec<f64> = col.iter().map(|&p| logit(p)).collect();
                    CalibrationMap::Sigmoid(fit_platt(&scores, &outcomes)?)
                }
            };
            maps.push(map);
        }
        Ok(Self { method, maps, warnings })
    }

    /// Maps every class column, then renormalises rows; a row whose mapped
    /// values are all zero becomes uniform.
    pub fn apply(&self, probs: &Array2<f64>) -> Result<Array2<f64>> {
        if probs.ncols() != self.maps.len() {
            return Err(Error::DimensionMismatch {
                expected: self.maps.len(),
                found: probs.ncols(),
            });
        }
        let mut out = probs.clone();
        let uniform = 1.0 / self.maps.len() as f64;
        for mut row in out.rows_mut() {
            for (v, map) in row.iter_mut().zip(&self.maps) {
                *v = map.apply(*v);
            }
            let z = row.sum();
            if z > 0.0 {
                row /= z;
            } else {
                row.fill(uniform);
            }
        }
        Ok(out)
    }
}

/// A base model whose confidence vectors pass through a fitted
/// [`ClasswiseCalibrator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedModel<M> {
    pub base: M,
    pub calibrator: ClasswiseCalibrator,
}

impl<M: ConfidenceModel> ConfidenceModel for CalibratedModel<M> {
    fn n_classes(&self) -> usize {
        self.base.n_classes()
    }

    fn predict_confidences(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.calibrator.apply(&self.base.predict_confidences(x)?)
    }
}

/// Fits one-vs-rest calibration maps for `model` on a held-out set. The
/// input model is cloned, never modified.
pub fn calibrate_model<M: ConfidenceModel + Clone>(
    model: &M,
    cal_x: &Array2<f64>,
    cal_y: &[usize],
    method: CalibrationMethod,
) -> Result<CalibratedModel<M>> {
    if cal_x.nrows() == 0 {
        return Err(Error::data("calibration set is empty"));
    }
    let probs = model.predict_confidences(cal_x)?;
    let calibrator = ClasswiseCalibrator::fit(&probs, cal_y, method)?;
    Ok(CalibratedModel {
        base: model.clone(),
        calibrator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LinearModel;
    use ndarray::array;

    #[test]
    fn single_class_calibration_set_is_identity() {
        let model = LinearModel {
            weights: array![[1.0, 0.0], [0.0, 1.0]],
            bias: array![0.0, 0.2],
        };
        let cal_x = array![[0.1, 0.5], [1.0, -1.0], [0.3, 0.3]];
        for method in [CalibrationMethod::Isotonic, CalibrationMethod::Sigmoid] {
            let cal = calibrate_model(&model, &cal_x, &[1, 1, 1], method).unwrap();
            assert!(cal.calibrator.maps.iter().all(|m| *m == CalibrationMap::Identity));
            assert_eq!(cal.calibrator.warnings.len(), 2);
            let x = array![[0.4, -0.2], [2.0, 1.0]];
            let base = model.predict_confidences(&x).unwrap();
            let out = cal.predict_confidences(&x).unwrap();
            for (a, b) in base.iter().zip(out.iter()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_calibration_set_is_rejected() {
        let model = LinearModel::zeros(2, 2);
        assert!(calibrate_model(&model, &Array2::zeros((0, 2)), &[], CalibrationMethod::Isotonic).is_err());
    }

    #[test]
    fn rows_sum_to_one_and_zero_rows_go_uniform() {
        let cal = ClasswiseCalibrator {
            method: CalibrationMethod::Isotonic,
            maps: vec![
                CalibrationMap::Isotonic(fit_isotonic(&[0.0, 1.0], &[0.0, 0.0]).unwrap()),
                CalibrationMap::Isotonic(fit_isotonic(&[0.0, 1.0], &[0.0, 0.0]).unwrap()),
                CalibrationMap::Identity,
            ],
            warnings: vec![],
        };
        let out = cal.apply(&array![[0.5, 0.5, 0.0], [0.2, 0.2, 0.6]]).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![1.0 / 3.0; 3]);
        assert_eq!(out.row(1).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn calibration_is_repeatable() {
        let model = LinearModel {
            weights: array![[2.0, -1.0], [-1.0, 2.0], [0.5, 0.5]],
            bias: array![0.0, 0.1, -0.1],
        };
        let cal_x = array![[0.1, 0.5], [1.0, -1.0], [0.3, 0.3], [-1.0, 2.0], [0.0, 0.0], [2.0, 2.0]];
        let cal_y = [1, 0, 2, 1, 2, 0];
        for method in [CalibrationMethod::Isotonic, CalibrationMethod::Sigmoid] {
            let a = calibrate_model(&model, &cal_x, &cal_y, method).unwrap();
            let b = calibrate_model(&model, &cal_x, &cal_y, method).unwrap();
            assert_eq!(
                a.predict_confidences(&cal_x).unwrap(),
                b.predict_confidences(&cal_x).unwrap()
            );
            let p = a.predict_confidences(&cal_x).unwrap();
            for row in p.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }
    }
}
