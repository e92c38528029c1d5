use std::fmt;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{filter_indices, minority_removal_curve, removal_count, MinorityCurve};
use super::run::{
    filter_and_train, random_scores, train_and_evaluate, Evaluation, PipelineResult, ReferenceKind, ReferenceResult,
    References,
};
use super::task::{CalibrationMode, PreparedTask};
use crate::detect::{
    fit_ensemble, score_ensemble, Addon, DetectorKind, DetectorSpec, Ensemble, TrainView, TrustScores,
};
use crate::error::{Error, Result};
use crate::learner::TrainConfig;
use crate::rng::{derive_path, seeded, tag, Rng};

/// Log-uniform ranges for the learning rate and the L2 penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rate: [f64; 2],
    pub l2: [f64; 2],
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: [1e-3, 1.0],
            l2: [1e-5, 1e-1],
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        for [lo, hi] in [self.learning_rate, self.l2] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::config(format!("invalid log-uniform range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut Rng) -> (f64, f64) {
        (log_uniform(rng, self.learning_rate), log_uniform(rng, self.l2))
    }
}

fn log_uniform(rng: &mut Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// One hyperparameter draw: independent settings for the detector's models
/// and for the final classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperSample {
    pub index: usize,
    pub detector_learning_rate: f64,
    pub detector_l2: f64,
    pub final_learning_rate: f64,
    pub final_l2: f64,
}

pub fn draw_samples(space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<HyperSample>> {
    space.validate()?;
    let mut rng = seeded(seed);
    Ok((0..n)
        .map(|index| {
            let (dlr, dl2) = space.draw(&mut rng);
            let (flr, fl2) = space.draw(&mut rng);
            HyperSample {
                index,
                detector_learning_rate: dlr,
                detector_l2: dl2,
                final_learning_rate: flr,
                final_l2: fl2,
            }
        })
        .collect())
}

/// An addon together with the calibration data it is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub addon: Addon,
    #[serde(default)]
    pub calibration: CalibrationMode,
}

impl Variant {
    pub fn new(addon: Addon) -> Self {
        Self {
            addon,
            calibration: CalibrationMode::default(),
        }
    }

    pub fn is_default_calibration(&self) -> bool {
        self.calibration == CalibrationMode::default()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.addon.needs_calibration_set() && !self.is_default_calibration() {
            write!(f, "{}@{}", self.addon, self.calibration)
        } else {
            write!(f, "{}", self.addon)
        }
    }
}

/// One pipeline of the search: a hyperparameter sample, a variant and a
/// filtering quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub task: String,
    pub repeat: usize,
    pub detector: String,
    pub variant: String,
    pub sample: usize,
    pub quantile: f64,
    pub detector_learning_rate: f64,
    pub detector_l2: f64,
    pub final_learning_rate: f64,
    pub final_l2: f64,
    pub n_kept: usize,
    pub validation_log_loss: f64,
    pub test_log_loss: f64,
    pub test_balanced_accuracy: f64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl TrialRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Index of the successful row with the lowest validation loss; ties go to
/// the lower quantile, then the lower sample index.
pub fn select_best(rows: &[TrialRow]) -> Option<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.is_ok() && r.validation_log_loss.is_finite())
        .min_by(|(_, a), (_, b)| {
            a.validation_log_loss
                .total_cmp(&b.validation_log_loss)
                .then(a.quantile.total_cmp(&b.quantile))
                .then(a.sample.cmp(&b.sample))
        })
        .map(|(i, _)| i)
}

/// What to search for one detector on one task.
#[derive(Debug, Clone)]
pub struct SearchRequest<'a> {
    pub detector: DetectorKind,
    pub variants: &'a [Variant],
    pub space: SearchSpace,
    pub n_samples: usize,
    pub quantiles: &'a [f64],
    /// Epochs, batch size and checkpointing of the detector's models; the
    /// learning rate and L2 come from the samples.
    pub detector_train: TrainConfig,
    pub final_train: TrainConfig,
    /// Replaces the default bagging parameters of independent ensembles.
    pub ensemble: Option<Ensemble>,
    pub seed: u64,
    /// Labels copied into the trial table.
    pub repeat: usize,
}

#[derive(Debug, Clone)]
pub struct SearchWinner {
    pub variant: Variant,
    /// Index into [`SearchOutcome::trials`].
    pub trial: usize,
    pub result: PipelineResult,
    pub curve: MinorityCurve,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub trials: Vec<TrialRow>,
    /// One per variant, in request order; `None` when every pipeline of the
    /// variant failed.
    pub winners: Vec<Option<SearchWinner>>,
}

struct SampleOutput {
    rows: Vec<TrialRow>,
    scores: Vec<Option<TrustScores>>,
}

/// Random search over detector and final-classifier hyperparameters crossed
/// with the quantile grid, for every variant. The detector's models are
/// trained once per sample and shared by all variants, so variants are
/// compared on identical draws.
pub fn random_search(
    task: &PreparedTask,
    request: &SearchRequest<'_>,
    references: Option<&References>,
) -> Result<SearchOutcome> {
    if request.n_samples == 0 {
        return Err(Error::config("random search needs at least one sample"));
    }
    if request.quantiles.is_empty() || request.variants.is_empty() {
        return Err(Error::config("random search needs quantiles and variants"));
    }
    for &q in request.quantiles {
        super::run::check_quantile(q)?;
    }
    let unit_seed = derive_path(request.seed, &[tag(request.detector.name())]);
    let samples = draw_samples(
        &request.space,
        request.n_samples,
        derive_path(unit_seed, &[tag("samples")]),
    )?;
    let calibration_sets = request
        .variants
        .iter()
        .map(|v| {
            if v.addon.needs_calibration_set() {
                task.calibration_set(v.calibration)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let train = TrainView::new(&task.train.x, &task.train.labels, task.n_classes)?;

    let outputs: Vec<SampleOutput> = samples
        .par_iter()
        .map(|s| run_sample(task, request, train, &calibration_sets, s, unit_seed))
        .collect::<Result<_>>()?;

    let mut trials = Vec::new();
    let mut scores: Vec<Vec<Option<TrustScores>>> = Vec::new();
    for out in outputs {
        trials.extend(out.rows);
        scores.push(out.scores);
    }

    let mut winners = Vec::with_capacity(request.variants.len());
    for (v_idx, variant) in request.variants.iter().enumerate() {
        let label = variant.to_string();
        let candidates: Vec<usize> = (0..trials.len()).filter(|&i| trials[i].variant == label).collect();
        let subset: Vec<TrialRow> = candidates.iter().map(|&i| trials[i].clone()).collect();
        let Some(best) = select_best(&subset).map(|k| candidates[k]) else {
            winners.push(None);
            continue;
        };
        let row = &trials[best];
        let sample = &samples[row.sample];
        let sample_scores = scores[row.sample][v_idx].as_ref().expect("successful rows have scores");
        let kept = filter_indices(sample_scores.scores(), row.quantile)?;
        let curve = minority_removal_curve(sample_scores, &task.train.labels, task.n_classes)?;
        let evaluation = Evaluation {
            n_train: row.n_kept,
            validation_log_loss: row.validation_log_loss,
            test_log_loss: row.test_log_loss,
            test_balanced_accuracy: row.test_balanced_accuracy,
        };
        let spec = detector_spec(request, sample, unit_seed, variant.addon);
        let result = PipelineResult {
            detector: spec.label(),
            quantile: row.quantile,
            evaluation,
            normalized_score: references.and_then(|r| r.normalize(evaluation.test_log_loss)),
            kept,
            minority_curve_area: curve.has_minority.then_some(curve.area_above_diagonal),
            calibration: variant.calibration,
            detector_config: spec.train_config,
            final_config: final_config(request, sample, unit_seed),
            warnings: sample_scores.provenance().warnings.clone(),
        };
        winners.push(Some(SearchWinner {
            variant: *variant,
            trial: best,
            result,
            curve,
        }));
    }
    Ok(SearchOutcome { trials, winners })
}

fn detector_spec(request: &SearchRequest<'_>, sample: &HyperSample, unit_seed: u64, addon: Addon) -> DetectorSpec {
    let config = TrainConfig {
        learning_rate: sample.detector_learning_rate,
        l2: sample.detector_l2,
        ..request.detector_train
    };
    let mut spec = DetectorSpec::named(
        request.detector,
        addon,
        config,
        derive_path(unit_seed, &[tag("detector"), sample.index as u64]),
    );
    if let (Some(e @ Ensemble::Independent { .. }), Ensemble::Independent { .. }) = (request.ensemble, spec.ensemble) {
        spec.ensemble = e;
    }
    spec
}

fn final_config(request: &SearchRequest<'_>, sample: &HyperSample, unit_seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: sample.final_learning_rate,
        l2: sample.final_l2,
        seed: derive_path(unit_seed, &[tag("final"), sample.index as u64]),
        ..request.final_train
    }
}

fn run_sample(
    task: &PreparedTask,
    request: &SearchRequest<'_>,
    train: TrainView<'_>,
    calibration_sets: &[Option<crate::detect::CalibrationSet>],
    sample: &HyperSample,
    unit_seed: u64,
) -> Result<SampleOutput> {
    let base_spec = detector_spec(request, sample, unit_seed, Addon::Baseline);
    let final_cfg = final_config(request, sample, unit_seed);
    let ensemble = fit_ensemble(train, &base_spec);
    let mut rows = Vec::new();
    let mut all_scores = Vec::new();
    for (variant, cal) in request.variants.iter().zip(calibration_sets) {
        let spec = DetectorSpec {
            addon: variant.addon,
            ..base_spec
        };
        let scores = match &ensemble {
            Ok(e) => score_ensemble(train, e, cal.as_ref(), &spec),
            Err(err) => Err(err.duplicate()),
        };
        for &q in request.quantiles {
            let mut row = TrialRow {
                task: task.name.clone(),
                repeat: request.repeat,
                detector: request.detector.name().to_string(),
                variant: variant.to_string(),
                sample: sample.index,
                quantile: q,
                detector_learning_rate: sample.detector_learning_rate,
                detector_l2: sample.detector_l2,
                final_learning_rate: sample.final_learning_rate,
                final_l2: sample.final_l2,
                n_kept: 0,
                validation_log_loss: f64::NAN,
                test_log_loss: f64::NAN,
                test_balanced_accuracy: f64::NAN,
                status: "ok".into(),
            };
            let outcome = match &scores {
                Ok(run) => filter_and_train(task, &run.scores, q, &final_cfg),
                Err(e) => Err(e.duplicate()),
            };
            match outcome {
                Ok((kept, eval)) => {
                    row.n_kept = kept.len();
                    row.validation_log_loss = eval.validation_log_loss;
                    row.test_log_loss = eval.test_log_loss;
                    row.test_balanced_accuracy = eval.test_balanced_accuracy;
                }
                Err(e) if e.is_fatal() => return Err(e),
                Err(e) => {
                    if scores.is_ok() {
                        row.n_kept = task.train.n() - removal_count(task.train.n(), q);
                    }
                    row.status = format!("failed: {e}");
                }
            }
            rows.push(row);
        }
        all_scores.push(scores.ok().map(|r| r.scores));
    }
    Ok(SampleOutput {
        rows,
        scores: all_scores,
    })
}

/// Reference runs of one task, each with its own hyperparameter draws and
/// the same selection rule as the detectors.
pub fn search_references(
    task: &PreparedTask,
    space: &SearchSpace,
    n_samples: usize,
    quantiles: &[f64],
    final_train: &TrainConfig,
    seed: u64,
) -> Result<References> {
    if n_samples == 0 {
        return Err(Error::config("reference search needs at least one sample"));
    }
    let unit_seed = derive_path(seed, &[tag("references")]);
    let samples = draw_samples(space, n_samples, derive_path(unit_seed, &[tag("samples")]))?;
    let best = |kind: ReferenceKind| -> Result<Option<ReferenceResult>> {
        let results: Vec<Option<ReferenceResult>> = samples
            .par_iter()
            .map(|s| {
                let cfg = TrainConfig {
                    learning_rate: s.final_learning_rate,
                    l2: s.final_l2,
                    seed: derive_path(unit_seed, &[tag("final"), s.index as u64]),
                    ..*final_train
                };
                match super::run::run_reference(kind, task, &cfg, quantiles, unit_seed) {
                    Ok(r) => Ok(Some(r)),
                    Err(e) if e.is_fatal() => Err(e),
                    Err(_) => Ok(None),
                }
            })
            .collect::<Result<_>>()?;
        let mut best: Option<ReferenceResult> = None;
        for r in results.into_iter().flatten() {
            if best
                .as_ref()
                .is_none_or(|b| r.evaluation.validation_log_loss < b.evaluation.validation_log_loss)
            {
                best = Some(r);
            }
        }
        Ok(best)
    };
    let none = best(ReferenceKind::None)?.ok_or_else(|| Error::data("every none-reference pipeline failed"))?;
    let has_truth = task.train.truth.is_some();
    Ok(References {
        none,
        random: best(ReferenceKind::Random)?,
        silver: if has_truth { best(ReferenceKind::Silver)? } else { None },
        gold: if has_truth { best(ReferenceKind::Gold)? } else { None },
    })
}

/// Evaluation of a fixed row subset; used to recompute persisted results.
pub fn evaluate_rows(task: &PreparedTask, rows: &[usize], config: &TrainConfig) -> Result<Evaluation> {
    train_and_evaluate(task, rows, &task.train.labels, config)
}

/// Random trust scores for a task's training partition.
pub fn random_trust_scores(task: &PreparedTask, seed: u64) -> Result<TrustScores> {
    TrustScores::from_values(random_scores(task.train.n(), seed), "random")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(sample: usize, q: f64, loss: f64, ok: bool) -> TrialRow {
        TrialRow {
            task: "t".into(),
            repeat: 0,
            detector: "aum".into(),
            variant: "baseline".into(),
            sample,
            quantile: q,
            detector_learning_rate: 0.1,
            detector_l2: 1e-3,
            final_learning_rate: 0.1,
            final_l2: 1e-3,
            n_kept: 10,
            validation_log_loss: loss,
            test_log_loss: loss,
            test_balanced_accuracy: 0.5,
            status: if ok { "ok".into() } else { "failed: x".into() },
        }
    }

    #[test]
    fn selection_over_six_rows() {
        let rows = vec![
            row(0, 0.1, 0.50, true),
            row(0, 0.2, 0.31, true),
            row(1, 0.3, 0.30, false),
            row(1, 0.4, 0.32, true),
            row(2, 0.1, 0.45, true),
            row(2, 0.5, 0.40, true),
        ];
        assert_eq!(select_best(&rows), Some(1));
    }

    #[test]
    fn selection_ties() {
        let rows = vec![row(1, 0.3, 0.2, true), row(0, 0.3, 0.2, true), row(2, 0.1, 0.2, true)];
        assert_eq!(select_best(&rows), Some(2));
        let rows = vec![row(1, 0.3, 0.2, true), row(0, 0.3, 0.2, true)];
        assert_eq!(select_best(&rows), Some(1));
        assert_eq!(select_best(&[row(0, 0.1, 0.1, false)]), None);
    }

    #[test]
    fn samples_stay_in_range() {
        let space = SearchSpace::default();
        let s = draw_samples(&space, 200, 9).unwrap();
        assert_eq!(s.len(), 200);
        for h in &s {
            assert!((1e-3..=1.0).contains(&h.detector_learning_rate));
            assert!((1e-3..=1.0).contains(&h.final_learning_rate));
            assert!((1e-5..=1e-1).contains(&h.detector_l2));
            assert!((1e-5..=1e-1).contains(&h.final_l2));
        }
        // roughly half the log-range below the log-midpoint
        let below = s.iter().filter(|h| h.detector_learning_rate < 10f64.powf(-1.5)).count();
        assert!((70..130).contains(&below), "{below}");
        assert_eq!(draw_samples(&space, 5, 1).unwrap(), draw_samples(&space, 5, 1).unwrap());
    }

    #[test]
    fn variant_labels() {
        assert_eq!(Variant::new(Addon::Isotonic).to_string(), "isotonic");
        let v = Variant {
            addon: Addon::Sigmoid,
            calibration: CalibrationMode {
                noisy: true,
                size: Some(30),
            },
        };
        assert_eq!(v.to_string(), "sigmoid@noisy:30");
    }
}
