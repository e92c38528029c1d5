use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::index::sample;
use rayon::prelude::*;

use super::scores::{Provenance, TrustScores};
use super::spec::{Addon, Aggregation, DetectorKind, DetectorSpec, Ensemble, Probe};
use crate::calibrate::{adjust_confidences, CalibrationMethod, ClasswiseCalibrator};
use crate::error::{Error, Result};
use crate::learner::{argmax, train_sgd, ConfidenceModel, LinearModel, LOG_LOSS_CLIP};
use crate::rng::{derive_path, seeded, tag};

/// Observed-label training set in feature space.
#[derive(Debug, Clone, Copy)]
pub struct TrainView<'a> {
    pub x: &'a Array2<f64>,
    pub y: &'a [usize],
    pub n_classes: usize,
}

impl<'a> TrainView<'a> {
    pub fn new(x: &'a Array2<f64>, y: &'a [usize], n_classes: usize) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.nrows() < 2 {
            return Err(Error::data("detectors need at least two training examples"));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::data(format!("label {bad} outside [0, {n_classes})")));
        }
        Ok(Self { x, y, n_classes })
    }
}

/// Held-out labeled set used by the isotonic and sigmoid addons. Every read
/// of the data is counted.
#[derive(Debug)]
pub struct CalibrationSet {
    x: Array2<f64>,
    y: Vec<usize>,
    noisy: bool,
    reads: AtomicUsize,
}

impl CalibrationSet {
    /// `noisy` records whether the labels went through the same corruption
    /// as the training labels.
    pub fn new(x: Array2<f64>, y: Vec<usize>, noisy: bool) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        Ok(Self {
            x,
            y,
            noisy,
            reads: AtomicUsize::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }

    pub fn read_count(&self) -> usize {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn data(&self) -> (&Array2<f64>, &[usize]) {
        self.reads.fetch_add(1, Ordering::Relaxed);
        (&self.x, &self.y)
    }
}

impl Clone for CalibrationSet {
    fn clone(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.clone(),
            noisy: self.noisy,
            reads: AtomicUsize::new(0),
        }
    }
}

/// One probed model: its (addon-transformed) confidences on the training
/// rows and, for bagged members, which rows it was trained on.
#[derive(Debug, Clone)]
pub struct MemberOutput {
    pub confidences: Array2<f64>,
    pub in_bag: Option<Vec<bool>>,
}

/// Scores together with the per-member evidence they were aggregated from.
#[derive(Debug, Clone)]
pub struct DetectorRun {
    pub scores: TrustScores,
    pub members: Vec<MemberOutput>,
}

/// Raw probe value on one confidence vector. The loss probe is returned as
/// `-ln p_y`, not yet negated.
pub fn probe_confidences(p: ArrayView1<'_, f64>, y: usize, probe: Probe) -> Result<f64> {
    if y >= p.len() {
        return Err(Error::data(format!("label {y} outside [0, {})", p.len())));
    }
    Ok(match probe {
        Probe::Margin => {
            let other = p
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != y)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            p[y] - other
        }
        Probe::Confidence => p[y],
        Probe::Accuracy => f64::from(u8::from(argmax(p) == y)),
        Probe::Loss => -p[y].max(LOG_LOSS_CLIP).ln(),
    })
}

/// Probe value of a model on a single feature row.
pub fn probe_example<M: ConfidenceModel + ?Sized>(
    model: &M,
    x: ArrayView1<'_, f64>,
    y: usize,
    probe: Probe,
) -> Result<f64> {
    let row = x.to_owned().insert_axis(Axis(0));
    let p = model.predict_confidences(&row)?;
    probe_confidences(p.row(0), y, probe)
}

/// Trust orientation: the loss probe is negated so higher always means
/// more trusted.
pub fn trust_value(raw: f64, probe: Probe) -> f64 {
    match probe {
        Probe::Loss => -raw,
        _ => raw,
    }
}

pub fn run_detector(
    train: TrainView<'_>,
    calibration: Option<&CalibrationSet>,
    spec: &DetectorSpec,
) -> Result<TrustScores> {
    Ok(run_detector_detailed(train, calibration, spec)?.scores)
}

pub fn score_aum(
    train: TrainView<'_>,
    calibration: Option<&CalibrationSet>,
    spec: &DetectorSpec,
) -> Result<TrustScores> {
    require_kind(spec, DetectorKind::Aum)?;
    run_detector(train, calibration, spec)
}

pub fn score_cleanlab(
    train: TrainView<'_>,
    calibration: Option<&CalibrationSet>,
    spec: &DetectorSpec,
) -> Result<TrustScores> {
    require_kind(spec, DetectorKind::CleanLab)?;
    run_detector(train, calibration, spec)
}

pub fn score_consensus(
    train: TrainView<'_>,
    calibration: Option<&CalibrationSet>,
    spec: &DetectorSpec,
) -> Result<TrustScores> {
    require_kind(spec, DetectorKind::Consensus)?;
    run_detector(train, calibration, spec)
}

pub fn score_small_loss(
    train: TrainView<'_>,
    calibration: Option<&CalibrationSet>,
    spec: &DetectorSpec,
) -> Result<TrustScores> {
    require_kind(spec, DetectorKind::SmallLoss)?;
    run_detector(train, calibration, spec)
}

fn require_kind(spec: &DetectorSpec, kind: DetectorKind) -> Result<()> {
    if spec.kind() != Some(kind) {
        return Err(Error::config(format!("spec {} is not a {kind} detector", spec.label())));
    }
    Ok(())
}

/// Models trained for one detector run, before any addon or probe.
#[derive(Debug, Clone)]
pub struct TrainedEnsemble {
    pub models: Vec<LinearModel>,
    /// Training-row membership per model; `None` outside independent
    /// ensembles.
    pub in_bag: Vec<Option<Vec<bool>>>,
}

/// Trains the ensemble, applies the addon to every member and aggregates
/// the probe values.
pub fn run_detector_detailed(
    train: TrainView<'_>,
    calibration: Option<&CalibrationSet>,
    spec: &DetectorSpec,
) -> Result<DetectorRun> {
    spec.validate()?;
    check_calibration(calibration, spec)?;
    let ensemble = fit_ensemble(train, spec)?;
    score_ensemble(train, &ensemble, calibration, spec)
}

fn check_calibration(calibration: Option<&CalibrationSet>, spec: &DetectorSpec) -> Result<()> {
    if spec.addon.needs_calibration_set() && calibration.is_none_or(CalibrationSet::is_empty) {
        return Err(Error::MissingCalibrationSet(spec.addon.to_string()));
    }
    Ok(())
}

/// Trains the models of `spec`'s ensemble. Addons do not influence
/// training, so one ensemble can be scored under every addon.
pub fn fit_ensemble(train: TrainView<'_>, spec: &DetectorSpec) -> Result<TrainedEnsemble> {
    spec.validate()?;
    let (models, in_bag) = train_members(train.x, train.y, train.n_classes, spec)?;
    Ok(TrainedEnsemble { models, in_bag })
}

/// Applies the addon to every member of a trained ensemble, probes and
/// aggregates.
pub fn score_ensemble(
    train: TrainView<'_>,
    ensemble: &TrainedEnsemble,
    calibration: Option<&CalibrationSet>,
    spec: &DetectorSpec,
) -> Result<DetectorRun> {
    spec.validate()?;
    check_calibration(calibration, spec)?;
    let TrainView { x, y, .. } = train;
    let n = y.len();
    if ensemble.models.is_empty() {
        return Err(Error::Invariant("empty ensemble".into()));
    }
    let method = match spec.addon {
        Addon::Isotonic => Some(CalibrationMethod::Isotonic),
        Addon::Sigmoid => Some(CalibrationMethod::Sigmoid),
        Addon::Baseline | Addon::Adjust => None,
    };
    let calibration = method.and(calibration);
    let (models, bags) = (&ensemble.models, ensemble.in_bag.iter().cloned());
    let mut warnings = Vec::new();
    let cal_probs_input = calibration.map(|c| c.data());
    let members: Vec<MemberOutput> = models
        .iter()
        .zip(bags)
        .map(|(model, in_bag)| {
            let raw = model.predict_confidences(x)?;
            let confidences = match (spec.addon, method, cal_probs_input) {
                (Addon::Adjust, _, _) => {
                    let out = adjust_confidences(&raw, y)?;
                    warnings.extend(out.warnings);
                    out.probs
                }
                (_, Some(m), Some((cx, cy))) => {
                    let cal = ClasswiseCalibrator::fit(&model.predict_confidences(cx)?, cy, m)?;
                    warnings.extend(cal.warnings.iter().cloned());
                    cal.apply(&raw)?
                }
                _ => raw,
            };
            Ok(MemberOutput { confidences, in_bag })
        })
        .collect::<Result<_>>()?;
    warnings.sort();
    warnings.dedup();

    let probe_matrix: Vec<Vec<f64>> = members
        .iter()
        .map(|m| {
            (0..n)
                .map(|i| probe_confidences(m.confidences.row(i), y[i], spec.probe).map(|v| trust_value(v, spec.probe)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut imputed = vec![false; n];
    if matches!(spec.aggregation, Aggregation::MeanOob) && members.iter().any(|m| m.in_bag.is_none()) {
        return Err(Error::Invariant("out-of-bag aggregation over unbagged models".into()));
    }
    let (scores, oob_counts) = match spec.aggregation {
        Aggregation::Sum => {
            let t = probe_matrix.len() as f64;
            let s = (0..n)
                .map(|i| probe_matrix.iter().map(|row| row[i]).sum::<f64>() / t)
                .collect();
            (s, None)
        }
        Aggregation::None => (probe_matrix[0].clone(), None),
        Aggregation::MeanOob => {
            let mut sums = vec![0.0; n];
            let mut counts = vec![0usize; n];
            for (m, row) in members.iter().zip(&probe_matrix) {
                let in_bag = m.in_bag.as_ref().expect("checked above");
                for i in 0..n {
                    if !in_bag[i] {
                        sums[i] += row[i];
                        counts[i] += 1;
                    }
                }
            }
            let mut scores: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
                .collect();
            let observed: Vec<f64> = scores.iter().copied().filter(|s| !s.is_nan()).collect();
            let fill = median(observed).unwrap_or(0.0);
            let mut n_imputed = 0;
            for (i, s) in scores.iter_mut().enumerate() {
                if s.is_nan() {
                    *s = fill;
                    imputed[i] = true;
                    n_imputed += 1;
                }
            }
            if n_imputed > 0 {
                warnings.push(format!(
                    "{n_imputed} examples were never out of bag and received the median score"
                ));
            }
            (scores, Some(counts))
        }
    };

    let provenance = Provenance {
        spec: Some(*spec),
        detector: spec.label(),
        calibration_size: calibration.map(CalibrationSet::len),
        calibration_noisy: calibration.map(CalibrationSet::is_noisy),
        warnings,
    };
    Ok(DetectorRun {
        scores: TrustScores::build(scores, oob_counts, imputed, provenance)?,
        members,
    })
}

type Members = (Vec<LinearModel>, Vec<Option<Vec<bool>>>);

fn train_members(x: &Array2<f64>, y: &[usize], n_classes: usize, spec: &DetectorSpec) -> Result<Members> {
    let n = y.len();
    match spec.ensemble {
        Ensemble::Progressive => {
            let config = spec
                .train_config
                .with_seed(derive_path(spec.seed, &[tag("progressive")]));
            let (_, trace) = train_sgd(x, y, n_classes, &config)?;
            let t = trace.snapshots.len();
            Ok((trace.snapshots, vec![None; t]))
        }
        Ensemble::None => {
            let config = spec.train_config.with_seed(derive_path(spec.seed, &[tag("single")]));
            let (model, _) = train_sgd(x, y, n_classes, &config)?;
            Ok((vec![model], vec![None]))
        }
        Ensemble::Independent { bags, bag_fraction } => {
            let m = ((bag_fraction * n as f64).round() as usize).clamp(1, n - 1);
            let trained: Vec<(LinearModel, Vec<bool>)> = (0..bags)
                .into_par_iter()
                .map(|b| {
                    let mut rng = seeded(derive_path(spec.seed, &[tag("bag"), b as u64]));
                    let mut idx = sample(&mut rng, n, m).into_vec();
                    idx.sort_unstable();
                    let mut in_bag = vec![false; n];
                    for &i in &idx {
                        in_bag[i] = true;
                    }
                    let xb = x.select(Axis(0), &idx);
                    let yb: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
                    let config = spec
                        .train_config
                        .with_seed(derive_path(spec.seed, &[tag("bag-train"), b as u64]));
                    let (model, _) = train_sgd(&xb, &yb, n_classes, &config)?;
                    Ok((model, in_bag))
                })
                .collect::<Result<_>>()?;
            Ok(trained.into_iter().map(|(m, b)| (m, Some(b))).unzip())
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    })
}
