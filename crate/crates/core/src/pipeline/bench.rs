use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::{MinorityCurve, QUANTILE_GRID};
use super::run::References;
use super::search::{random_search, search_references, SearchRequest, SearchSpace, TrialRow, Variant};
use super::stats::{
    spearman_correlation, wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative, WilcoxonResult,
};
use super::task::{prepare_task, CalibrationMode, TaskSpec};
use crate::detect::{Addon, DetectorKind, Ensemble};
use crate::error::{Error, Result};
use crate::learner::TrainConfig;
use crate::rng::{derive_path, tag};

/// Points kept per minority-removal curve in the persisted tables.
pub const CURVE_RESOLUTION: usize = 20;

fn default_quantiles() -> Vec<f64> {
    QUANTILE_GRID.to_vec()
}

fn default_repeats() -> usize {
    1
}

fn default_alpha() -> f64 {
    0.95
}

/// A benchmark sweep: tasks × repeats × detectors × variants × samples ×
/// quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub tasks: Vec<TaskSpec>,
    /// Independent re-draws of every task (data, corruption, split).
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    pub detectors: Vec<DetectorKind>,
    pub addons: Vec<Addon>,
    /// Adds, for each calibrated addon, a variant whose calibration labels
    /// are corrupted like the training labels.
    #[serde(default)]
    pub noisy_calibration: bool,
    /// Adds, for each calibrated addon, variants with the calibration set
    /// subsampled to these sizes.
    #[serde(default)]
    pub calibration_sizes: Vec<usize>,
    pub samples: usize,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub search_space: SearchSpace,
    #[serde(default)]
    pub detector_train: TrainConfig,
    #[serde(default)]
    pub final_train: TrainConfig,
    /// Replaces the default bagging of the out-of-bag detectors.
    #[serde(default)]
    pub bags: Option<(usize, f64)>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub seed: u64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tasks.is_empty() || self.detectors.is_empty() || self.addons.is_empty() {
            return Err(Error::config("bench needs at least one task, detector and addon"));
        }
        if self.repeats == 0 || self.samples == 0 {
            return Err(Error::config("repeats and samples must be at least 1"));
        }
        let mut names: Vec<&str> = self.tasks.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("task names must be unique"));
        }
        if self.calibration_sizes.contains(&0) {
            return Err(Error::config("calibration sizes must be positive"));
        }
        for &q in &self.quantiles {
            super::run::check_quantile(q)?;
        }
        self.detector_train.validate()?;
        self.final_train.validate()?;
        Ok(())
    }

    pub fn variants(&self) -> Vec<Variant> {
        let mut out: Vec<Variant> = self.addons.iter().map(|&a| Variant::new(a)).collect();
        let calibrated: Vec<Addon> = self
            .addons
            .iter()
            .copied()
            .filter(|a| a.needs_calibration_set())
            .collect();
        if self.noisy_calibration {
            for &addon in &calibrated {
                out.push(Variant {
                    addon,
                    calibration: CalibrationMode {
                        noisy: true,
                        size: None,
                    },
                });
            }
        }
        for &size in &self.calibration_sizes {
            for &addon in &calibrated {
                out.push(Variant {
                    addon,
                    calibration: CalibrationMode {
                        noisy: false,
                        size: Some(size),
                    },
                });
            }
        }
        out
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: BenchConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// The selected pipeline of one (task, repeat, detector, variant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinnerRow {
    pub task: String,
    pub repeat: usize,
    pub detector: String,
    pub variant: String,
    pub addon: Addon,
    /// `clean`, `noisy`, or either with a `:<size>` suffix.
    pub calibration: String,
    pub sample: usize,
    pub quantile: f64,
    pub n_kept: usize,
    pub validation_log_loss: f64,
    pub test_log_loss: f64,
    pub test_balanced_accuracy: f64,
    pub normalized_score: Option<f64>,
    pub minority_curve_area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReferences {
    pub task: String,
    pub repeat: usize,
    pub n_train: usize,
    pub n_mislabeled: Option<usize>,
    pub references: References,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub task: String,
    pub repeat: usize,
    pub detector: String,
    pub variant: String,
    pub fraction_removed: f64,
    pub minority_fraction_removed: f64,
}

/// Signed-rank comparison of a variant against the plain baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    /// A detector name, or `all` for the pooled comparison.
    pub detector: String,
    pub metric: String,
    pub n_pairs: usize,
    pub median_difference: f64,
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    pub two_sided: WilcoxonResult,
    /// One-sided test that the variant is better than the baseline.
    pub improvement: WilcoxonResult,
    /// One-sided test that the variant is worse than the baseline.
    pub harm: WilcoxonResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub references: Vec<TaskReferences>,
    pub trials: Vec<TrialRow>,
    pub winners: Vec<WinnerRow>,
    pub curves: Vec<CurveRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
    pub elapsed_seconds: f64,
}

struct UnitOutput {
    references: TaskReferences,
    trials: Vec<TrialRow>,
    winners: Vec<WinnerRow>,
    curves: Vec<CurveRow>,
    warnings: Vec<String>,
}

pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let start = Instant::now();
    let variants = config.variants();
    let units: Vec<(usize, usize)> = (0..config.tasks.len())
        .flat_map(|t| (0..config.repeats).map(move |r| (t, r)))
        .collect();
    let outputs: Vec<UnitOutput> = units
        .par_iter()
        .map(|&(t, r)| run_unit(config, &variants, t, r))
        .collect::<Result<_>>()?;

    let mut report = BenchReport {
        config: config.clone(),
        references: Vec::new(),
        trials: Vec::new(),
        winners: Vec::new(),
        curves: Vec::new(),
        comparisons: Vec::new(),
        warnings: Vec::new(),
        elapsed_seconds: 0.0,
    };
    for out in outputs {
        report.references.push(out.references);
        report.trials.extend(out.trials);
        report.winners.extend(out.winners);
        report.curves.extend(out.curves);
        report.warnings.extend(out.warnings);
    }
    report.comparisons = compare_variants(&report.winners, &variants, &config.detectors, config.alpha)?;
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn run_unit(config: &BenchConfig, variants: &[Variant], t: usize, repeat: usize) -> Result<UnitOutput> {
    let spec = &config.tasks[t];
    let seed = derive_path(config.seed, &[tag(&spec.name), repeat as u64]);
    let task = prepare_task(spec, seed)?;
    log::info!("task {} repeat {repeat}: {} training rows", spec.name, task.train.n());
    let references = search_references(
        &task,
        &config.search_space,
        config.samples,
        &config.quantiles,
        &config.final_train,
        seed,
    )?;
    let mut warnings: Vec<String> = task.warnings.iter().map(|w| format!("{}: {w}", spec.name)).collect();
    if references.silver.is_some() && references.normalize(references.none.evaluation.test_log_loss).is_none() {
        warnings.push(format!("{} repeat {repeat}: degenerate references", spec.name));
    }
    let ensemble = config
        .bags
        .map(|(bags, bag_fraction)| Ensemble::Independent { bags, bag_fraction });

    let mut out = UnitOutput {
        references: TaskReferences {
            task: spec.name.clone(),
            repeat,
            n_train: task.train.n(),
            n_mislabeled: task.train.mislabel_mask().map(|m| m.iter().filter(|&&b| b).count()),
            references: references.clone(),
        },
        trials: Vec::new(),
        winners: Vec::new(),
        curves: Vec::new(),
        warnings,
    };
    for &detector in &config.detectors {
        let request = SearchRequest {
            detector,
            variants,
            space: config.search_space,
            n_samples: config.samples,
            quantiles: &config.quantiles,
            detector_train: config.detector_train,
            final_train: config.final_train,
            ensemble,
            seed,
            repeat,
        };
        let outcome = random_search(&task, &request, Some(&references))?;
        let offset = out.trials.len();
        for winner in outcome.winners.into_iter().flatten() {
            let row = &outcome.trials[winner.trial];
            out.winners.push(WinnerRow {
                task: spec.name.clone(),
                repeat,
                detector: detector.name().into(),
                variant: winner.variant.to_string(),
                addon: winner.variant.addon,
                calibration: winner.variant.calibration.to_string(),
                sample: row.sample,
                quantile: row.quantile,
                n_kept: row.n_kept,
                validation_log_loss: row.validation_log_loss,
                test_log_loss: row.test_log_loss,
                test_balanced_accuracy: row.test_balanced_accuracy,
                normalized_score: winner.result.normalized_score,
                minority_curve_area: winner.result.minority_curve_area,
            });
            out.curves
                .extend(downsample_curve(&winner.curve).into_iter().map(|(x, y)| CurveRow {
                    task: spec.name.clone(),
                    repeat,
                    detector: detector.name().into(),
                    variant: winner.variant.to_string(),
                    fraction_removed: x,
                    minority_fraction_removed: y,
                }));
        }
        let failed = outcome.trials.iter().filter(|r| !r.is_ok()).count();
        if failed > 0 {
            out.warnings.push(format!(
                "{} repeat {repeat} {detector}: {failed} of {} pipelines failed",
                spec.name,
                outcome.trials.len()
            ));
        }
        out.trials.extend(outcome.trials);
        debug_assert!(out.trials.len() >= offset);
    }
    Ok(out)
}

/// Curve values at `x = k / CURVE_RESOLUTION`, taking the last point at or
/// before each grid position.
fn downsample_curve(curve: &MinorityCurve) -> Vec<(f64, f64)> {
    if !curve.has_minority {
        return Vec::new();
    }
    let n = curve.points.len() - 1;
    (0..=CURVE_RESOLUTION)
        .map(|k| {
            let idx = k * n / CURVE_RESOLUTION;
            (k as f64 / CURVE_RESOLUTION as f64, curve.points[idx].1)
        })
        .collect()
}

/// Paired normalized scores of `variant` and the baseline over every
/// (task, repeat, detector) where both exist, optionally restricted to one
/// detector.
pub fn paired_scores(winners: &[WinnerRow], variant: &str, baseline: &str, detector: Option<&str>) -> Vec<(f64, f64)> {
    let key = |w: &WinnerRow| (w.task.clone(), w.repeat, w.detector.clone());
    let base: BTreeMap<_, f64> = winners
        .iter()
        .filter(|w| w.variant == baseline)
        .filter_map(|w| w.normalized_score.map(|s| (key(w), s)))
        .collect();
    winners
        .iter()
        .filter(|w| w.variant == variant && detector.is_none_or(|d| w.detector == d))
        .filter_map(|w| Some((w.normalized_score?, *base.get(&key(w))?)))
        .collect()
}

fn compare_variants(
    winners: &[WinnerRow],
    variants: &[Variant],
    detectors: &[DetectorKind],
    alpha: f64,
) -> Result<Vec<ComparisonRow>> {
    let baseline = Variant::new(Addon::Baseline).to_string();
    if !variants.iter().any(|v| v.to_string() == baseline) {
        return Ok(Vec::new());
    }
    let mut rows = Vec::new();
    for v in variants.iter().map(Variant::to_string).filter(|v| *v != baseline) {
        let scopes = std::iter::once(None).chain(detectors.iter().map(|d| Some(d.name())));
        for scope in scopes {
            let pairs = paired_scores(winners, &v, &baseline, scope);
            if pairs.is_empty() {
                continue;
            }
            let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let two_sided = wilcoxon_signed_rank(&a, &b, alpha)?;
            let (wins, draws, losses) = two_sided.wins_draws_losses(true);
            let mut diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            diffs.sort_by(f64::total_cmp);
            let m = diffs.len();
            let median_difference = if m % 2 == 1 {
                diffs[m / 2]
            } else {
                (diffs[m / 2 - 1] + diffs[m / 2]) / 2.0
            };
            rows.push(ComparisonRow {
                variant: v.clone(),
                detector: scope.unwrap_or("all").into(),
                metric: "normalized_score".into(),
                n_pairs: a.len(),
                median_difference,
                wins,
                draws,
                losses,
                two_sided,
                improvement: wilcoxon_signed_rank_with(&a, &b, alpha, Alternative::Less)?,
                harm: wilcoxon_signed_rank_with(&a, &b, alpha, Alternative::Greater)?,
            });
        }
    }
    Ok(rows)
}

/// Spearman correlation between two variants' normalized scores over
/// matching (task, repeat, detector) triples.
pub fn variant_correlation(winners: &[WinnerRow], a: &str, b: &str) -> Result<f64> {
    let pairs = paired_scores(winners, a, b, None);
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    spearman_correlation(&x, &y)
}

impl BenchReport {
    pub fn comparison(&self, variant: &str, detector: &str) -> Option<&ComparisonRow> {
        self.comparisons
            .iter()
            .find(|c| c.variant == variant && c.detector == detector)
    }

    pub fn winners_of<'a>(&'a self, variant: &'a str) -> impl Iterator<Item = &'a WinnerRow> + 'a {
        self.winners.iter().filter(move |w| w.variant == variant)
    }

    /// Median normalized score of a variant over all its winners.
    pub fn median_normalized(&self, variant: &str) -> Option<f64> {
        let mut v: Vec<f64> = self.winners_of(variant).filter_map(|w| w.normalized_score).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len();
        Some(if m % 2 == 1 {
            v[m / 2]
        } else {
            (v[m / 2 - 1] + v[m / 2]) / 2.0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn winner(task: &str, detector: &str, variant: &str, score: f64) -> WinnerRow {
        WinnerRow {
            task: task.into(),
            repeat: 0,
            detector: detector.into(),
            variant: variant.into(),
            addon: Addon::Baseline,
            calibration: CalibrationMode::default().to_string(),
            sample: 0,
            quantile: 0.1,
            n_kept: 1,
            validation_log_loss: 0.0,
            test_log_loss: 0.0,
            test_balanced_accuracy: 0.0,
            normalized_score: Some(score),
            minority_curve_area: None,
        }
    }

    #[test]
    fn pairing_matches_keys() {
        let w = vec![
            winner("a", "aum", "baseline", 150.0),
            winner("a", "aum", "isotonic", 120.0),
            winner("b", "aum", "isotonic", 110.0),
            winner("b", "cleanlab", "baseline", 170.0),
            winner("b", "cleanlab", "isotonic", 130.0),
        ];
        let p = paired_scores(&w, "isotonic", "baseline", None);
        assert_eq!(p, vec![(120.0, 150.0), (130.0, 170.0)]);
        assert_eq!(
            paired_scores(&w, "isotonic", "baseline", Some("aum")),
            vec![(120.0, 150.0)]
        );
    }

    #[test]
    fn variant_expansion() {
        let cfg = BenchConfig {
            tasks: vec![],
            repeats: 1,
            detectors: vec![DetectorKind::Aum],
            addons: vec![Addon::Baseline, Addon::Isotonic],
            noisy_calibration: true,
            calibration_sizes: vec![10, 100],
            samples: 1,
            quantiles: default_quantiles(),
            search_space: SearchSpace::default(),
            detector_train: TrainConfig::default(),
            final_train: TrainConfig::default(),
            bags: None,
            alpha: 0.95,
            seed: 0,
        };
        let labels: Vec<String> = cfg.variants().iter().map(ToString::to_string).collect();
        assert_eq!(
            labels,
            vec![
                "baseline",
                "isotonic",
                "isotonic@noisy",
                "isotonic@clean:10",
                "isotonic@clean:100"
            ]
        );
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn curve_downsampling() {
        let points: Vec<(f64, f64)> = (0..=40).map(|k| (k as f64 / 40.0, (k as f64 / 40.0).sqrt())).collect();
        let c = MinorityCurve {
            points,
            area_above_diagonal: 0.0,
            minority_classes: vec![1],
            has_minority: true,
        };
        let d = downsample_curve(&c);
        assert_eq!(d.len(), CURVE_RESOLUTION + 1);
        assert_eq!(d[0], (0.0, 0.0));
        assert_eq!(d[CURVE_RESOLUTION], (1.0, 1.0));
        assert!((d[10].1 - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
