use std::fmt;

use ndarray::Axis;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::filter::{filter_indices, minority_removal_curve};
use super::task::{prepare_task, CalibrationMode, PreparedTask, TaskSpec};
use crate::detect::{run_detector, Addon, DetectorKind, DetectorSpec, TrainView, TrustScores};
use crate::error::{Error, Result};
use crate::learner::{balanced_accuracy_metric, log_loss_metric, train_sgd, ConfidenceModel, TrainConfig};
use crate::rng::{derive_path, seeded, tag};

/// Metrics of one final classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_train: usize,
    pub validation_log_loss: f64,
    pub test_log_loss: f64,
    pub test_balanced_accuracy: f64,
}

/// Trains the final classifier on training rows `rows` with per-row labels
/// `labels` (indexed like the full training partition) and evaluates it on
/// the clean validation and test partitions.
pub fn train_and_evaluate(
    task: &PreparedTask,
    rows: &[usize],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<Evaluation> {
    if rows.is_empty() {
        return Err(Error::data("final training set is empty"));
    }
    let y: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::data("final training set has a single class"));
    }
    let x = task.train.x.select(Axis(0), rows);
    let (model, _) = train_sgd(&x, &y, task.n_classes, config)?;
    let val = model.predict_confidences(&task.validation.x)?;
    let test = model.predict_confidences(&task.test.x)?;
    let pred = crate::learner::argmax_rows(&test);
    let eval = Evaluation {
        n_train: rows.len(),
        validation_log_loss: log_loss_metric(&val, &task.validation.labels),
        test_log_loss: log_loss_metric(&test, &task.test.labels),
        test_balanced_accuracy: balanced_accuracy_metric(&pred, &task.test.labels),
    };
    if !(eval.validation_log_loss.is_finite() && eval.test_log_loss.is_finite()) {
        return Err(Error::Invariant("non-finite evaluation metric".into()));
    }
    Ok(eval)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Unfiltered noisy training set.
    None,
    /// Uniform random trust scores, filtered over the quantile grid.
    Random,
    /// Only the correctly labeled training examples.
    Silver,
    /// Every training example with its true label.
    Gold,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 4] = [
        ReferenceKind::None,
        ReferenceKind::Random,
        ReferenceKind::Silver,
        ReferenceKind::Gold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReferenceKind::None => "none",
            ReferenceKind::Random => "random",
            ReferenceKind::Silver => "silver",
            ReferenceKind::Gold => "gold",
        }
    }
}

impl fmt::Display for ReferenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResult {
    pub kind: ReferenceKind,
    pub evaluation: Evaluation,
    pub final_config: TrainConfig,
    /// Selected filtering quantile (random reference only).
    pub quantile: Option<f64>,
}

/// Trains one reference with a fixed final configuration. The random
/// reference selects its quantile from `quantiles` by validation loss.
pub fn run_reference(
    kind: ReferenceKind,
    task: &PreparedTask,
    final_config: &TrainConfig,
    quantiles: &[f64],
    seed: u64,
) -> Result<ReferenceResult> {
    let n = task.train.n();
    let all: Vec<usize> = (0..n).collect();
    let missing = |what: &str| Error::data(format!("{kind} reference needs {what}"));
    let single = |rows: &[usize], labels: &[usize]| -> Result<ReferenceResult> {
        Ok(ReferenceResult {
            kind,
            evaluation: train_and_evaluate(task, rows, labels, final_config)?,
            final_config: *final_config,
            quantile: None,
        })
    };
    match kind {
        ReferenceKind::None => single(&all, &task.train.labels),
        ReferenceKind::Silver => {
            let mask = task.train.mislabel_mask().ok_or_else(|| missing("a mislabel mask"))?;
            let clean: Vec<usize> = all.into_iter().filter(|&i| !mask[i]).collect();
            single(&clean, &task.train.labels)
        }
        ReferenceKind::Gold => {
            let truth = task.train.truth.as_ref().ok_or_else(|| missing("true labels"))?;
            single(&all, truth)
        }
        ReferenceKind::Random => {
            let scores = random_scores(n, derive_path(seed, &[tag("random-reference")]));
            let mut best: Option<ReferenceResult> = None;
            for &q in quantiles {
                let rows = filter_indices(&scores, q)?;
                let Ok(evaluation) = train_and_evaluate(task, &rows, &task.train.labels, final_config) else {
                    continue;
                };
                if best
                    .as_ref()
                    .is_none_or(|b| evaluation.validation_log_loss < b.evaluation.validation_log_loss)
                {
                    best = Some(ReferenceResult {
                        kind,
                        evaluation,
                        final_config: *final_config,
                        quantile: Some(q),
                    });
                }
            }
            best.ok_or_else(|| Error::data("every random-reference pipeline failed"))
        }
    }
}

pub fn random_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// Reference results of one task, each selected by validation loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct References {
    pub none: ReferenceResult,
    pub random: Option<ReferenceResult>,
    pub silver: Option<ReferenceResult>,
    pub gold: Option<ReferenceResult>,
}

impl References {
    pub fn get(&self, kind: ReferenceKind) -> Option<&ReferenceResult> {
        match kind {
            ReferenceKind::None => Some(&self.none),
            ReferenceKind::Random => self.random.as_ref(),
            ReferenceKind::Silver => self.silver.as_ref(),
            ReferenceKind::Gold => self.gold.as_ref(),
        }
    }

    /// Normalized score of a test loss; `None` without a usable silver
    /// reference.
    pub fn normalize(&self, test_loss: f64) -> Option<f64> {
        let silver = self.silver.as_ref()?;
        normalize_score(
            test_loss,
            self.none.evaluation.test_log_loss,
            silver.evaluation.test_log_loss,
        )
        .ok()
    }
}

/// Maps test losses to a scale where the silver reference scores 100 and
/// the unfiltered reference 200. Lower is better; values outside the range
/// are allowed.
pub fn normalize_score(method_loss: f64, none_loss: f64, silver_loss: f64) -> Result<f64> {
    let span = none_loss - silver_loss;
    if span == 0.0 || !span.is_finite() || !method_loss.is_finite() {
        return Err(Error::DegenerateReferences(span));
    }
    Ok(100.0 + 100.0 * (method_loss - silver_loss) / span)
}

/// Output of one detection, filtering and training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub detector: String,
    pub quantile: f64,
    pub evaluation: Evaluation,
    pub normalized_score: Option<f64>,
    /// Surviving training rows, ascending.
    pub kept: Vec<usize>,
    pub minority_curve_area: Option<f64>,
    pub calibration: CalibrationMode,
    pub detector_config: TrainConfig,
    pub final_config: TrainConfig,
    pub warnings: Vec<String>,
}

pub fn check_quantile(q: f64) -> Result<()> {
    let tenths = q * 10.0;
    if !(0.0..=9.0).contains(&tenths) || (tenths - tenths.round()).abs() > 1e-9 {
        return Err(Error::config(format!("quantile {q} is not one of 0.0, 0.1, ..., 0.9")));
    }
    Ok(())
}

/// Filters by `scores` at `quantile`, trains the final classifier on the
/// survivors and evaluates it.
pub fn filter_and_train(
    task: &PreparedTask,
    scores: &TrustScores,
    quantile: f64,
    final_config: &TrainConfig,
) -> Result<(Vec<usize>, Evaluation)> {
    if scores.len() != task.train.n() {
        return Err(Error::DimensionMismatch {
            expected: task.train.n(),
            found: scores.len(),
        });
    }
    let kept = filter_indices(scores.scores(), quantile)?;
    let eval = train_and_evaluate(task, &kept, &task.train.labels, final_config)?;
    Ok((kept, eval))
}

/// Detection, filtering at `quantile` and final training on a prepared task.
pub fn run_three_stage(
    task: &PreparedTask,
    spec: &DetectorSpec,
    quantile: f64,
    final_config: &TrainConfig,
    calibration: CalibrationMode,
    references: Option<&References>,
) -> Result<PipelineResult> {
    check_quantile(quantile)?;
    let cal = if spec.addon.needs_calibration_set() {
        task.calibration_set(calibration)?
    } else {
        None
    };
    let train = TrainView::new(&task.train.x, &task.train.labels, task.n_classes)?;
    let scores = run_detector(train, cal.as_ref(), spec)?;
    let (kept, evaluation) = filter_and_train(task, &scores, quantile, final_config)?;
    let curve = minority_removal_curve(&scores, &task.train.labels, task.n_classes)?;
    Ok(PipelineResult {
        detector: spec.label(),
        quantile,
        evaluation,
        normalized_score: references.and_then(|r| r.normalize(evaluation.test_log_loss)),
        kept,
        minority_curve_area: curve.has_minority.then_some(curve.area_above_diagonal),
        calibration,
        detector_config: spec.train_config,
        final_config: *final_config,
        warnings: scores.provenance().warnings.clone(),
    })
}

/// Complete description of a single pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub task: TaskSpec,
    pub detector: DetectorKind,
    pub addon: Addon,
    pub detector_train: TrainConfig,
    pub final_train: TrainConfig,
    pub quantile: f64,
    #[serde(default)]
    pub calibration: CalibrationMode,
    pub seed: u64,
}

/// Prepares the task, computes the none and silver references with the
/// same final configuration and runs the three stages.
pub fn run_pipeline(config: &PipelineConfig) -> Result<(PipelineResult, References)> {
    check_quantile(config.quantile)?;
    let task = prepare_task(&config.task, config.seed)?;
    let references = References {
        none: run_reference(ReferenceKind::None, &task, &config.final_train, &[], config.seed)?,
        random: None,
        silver: run_reference(ReferenceKind::Silver, &task, &config.final_train, &[], config.seed).ok(),
        gold: run_reference(ReferenceKind::Gold, &task, &config.final_train, &[], config.seed).ok(),
    };
    let spec = DetectorSpec::named(
        config.detector,
        config.addon,
        config.detector_train,
        derive_path(config.seed, &[tag("detector")]),
    );
    let result = run_three_stage(
        &task,
        &spec,
        config.quantile,
        &config.final_train,
        config.calibration,
        Some(&references),
    )?;
    Ok((result, references))
}
