use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{
    apply_transition_noise, flip_labels, load_csv_with, make_blobs, make_two_moons, split_dataset, stratified_order,
    BlobsConfig, CsvOptions, Dataset, NoiseKind, NoiseTransitionMatrix, SplitIndices, SplitSpec,
};
use crate::detect::CalibrationSet;
use crate::error::{Error, Result};
use crate::features::{FeatureOptions, FeaturePipeline};
use crate::rng::{derive_path, tag};

/// Label corruption applied to a clean partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    None,
    /// Noise completely at random: every label flips with probability
    /// `rate`, uniformly to another class.
    Uniform { rate: f64 },
    /// Noise at random: class `c` flips with probability `rates[c]`.
    PerClass { rates: Vec<f64> },
    /// Exactly `per_class` flips in every true class.
    Flip { per_class: usize },
    /// Explicit column-stochastic matrix, `entries[observed][true]`.
    Matrix { entries: Vec<Vec<f64>> },
}

impl NoiseSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, NoiseSpec::None)
    }

    /// Corrupts `dataset`; its current labels become the ground truth.
    pub fn apply(&self, dataset: &Dataset, seed: u64) -> Result<Dataset> {
        let c = dataset.n_classes();
        match self {
            NoiseSpec::None => Ok(dataset.with_truth()),
            NoiseSpec::Uniform { rate } => {
                apply_transition_noise(dataset, &NoiseTransitionMatrix::uniform(c, *rate)?, seed)
            }
            NoiseSpec::PerClass { rates } => {
                if rates.len() != c {
                    return Err(Error::DimensionMismatch {
                        expected: c,
                        found: rates.len(),
                    });
                }
                apply_transition_noise(dataset, &NoiseTransitionMatrix::per_class(rates)?, seed)
            }
            NoiseSpec::Flip { per_class } => flip_labels(dataset, *per_class, seed),
            NoiseSpec::Matrix { entries } => apply_transition_noise(
                dataset,
                &NoiseTransitionMatrix::new(entries.clone(), NoiseKind::Nar)?,
                seed,
            ),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::None => write!(f, "none"),
            NoiseSpec::Uniform { rate } => write!(f, "uniform:{rate}"),
            NoiseSpec::PerClass { rates } => {
                let r: Vec<String> = rates.iter().map(f64::to_string).collect();
                write!(f, "per_class:{}", r.join(","))
            }
            NoiseSpec::Flip { per_class } => write!(f, "flip:{per_class}"),
            NoiseSpec::Matrix { .. } => write!(f, "matrix"),
        }
    }
}

/// `none`, `uniform:<rate>`, `per_class:<r0>,<r1>,...` or `flip:<count>`.
impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let bad = || Error::config(format!("cannot parse noise spec `{s}`"));
        match kind.trim() {
            "none" if arg.is_empty() => Ok(NoiseSpec::None),
            "uniform" | "ncar" => Ok(NoiseSpec::Uniform {
                rate: arg.trim().parse().map_err(|_| bad())?,
            }),
            "per_class" | "nar" => Ok(NoiseSpec::PerClass {
                rates: arg
                    .split(',')
                    .map(|r| r.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?,
            }),
            "flip" => Ok(NoiseSpec::Flip {
                per_class: arg.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

/// Where a task's rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskSource {
    TwoMoons {
        n: usize,
        minority_fraction: f64,
        noise_std: f64,
    },
    /// The generator's own seed is replaced by the task seed.
    Blobs(BlobsConfig),
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        text_columns: Vec<String>,
        #[serde(default)]
        true_label_column: Option<String>,
    },
}

impl TaskSource {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            TaskSource::TwoMoons {
                n,
                minority_fraction,
                noise_std,
            } => make_two_moons(*n, *minority_fraction, *noise_std, seed),
            TaskSource::Blobs(cfg) => make_blobs(&BlobsConfig { seed, ..cfg.clone() }),
            TaskSource::Csv {
                path,
                label_column,
                text_columns,
                true_label_column,
            } => load_csv_with(
                path,
                &CsvOptions {
                    label_column: label_column.clone(),
                    text_columns: text_columns.clone(),
                    true_label_column: true_label_column.clone(),
                },
            ),
        }
    }
}

/// A benchmark task: data source, corruption, partitioning and features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub source: TaskSource,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub split: SplitSpec,
    #[serde(default)]
    pub features: FeatureOptions,
}

/// One partition in feature space.
#[derive(Debug, Clone)]
pub struct Part {
    pub x: Array2<f64>,
    /// Labels a learner sees on this partition.
    pub labels: Vec<usize>,
    pub truth: Option<Vec<usize>>,
}

impl Part {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn truth_or_labels(&self) -> &[usize] {
        self.truth.as_deref().unwrap_or(&self.labels)
    }

    pub fn mislabel_mask(&self) -> Option<Vec<bool>> {
        self.truth
            .as_ref()
            .map(|t| t.iter().zip(&self.labels).map(|(a, b)| a != b).collect())
    }
}

/// How the calibration partition is presented to calibrated detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct CalibrationMode {
    /// Use labels corrupted like the training labels.
    #[serde(default)]
    pub noisy: bool,
    /// Stratified subsample of at most this many rows.
    #[serde(default)]
    pub size: Option<usize>,
}

impl fmt::Display for CalibrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let quality = if self.noisy { "noisy" } else { "clean" };
        match self.size {
            Some(k) => write!(f, "{quality}:{k}"),
            None => f.write_str(quality),
        }
    }
}

/// A task after loading, corruption, splitting and feature fitting.
/// Validation and test labels are the ground truth whenever it is known.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub name: String,
    pub seed: u64,
    pub n_classes: usize,
    pub train: Part,
    pub validation: Part,
    pub test: Part,
    pub calibration: Option<Part>,
    /// Calibration labels after the training corruption; `None` without a
    /// calibration partition.
    pub calibration_noisy_labels: Option<Vec<usize>>,
    pub indices: SplitIndices,
    pub feature_dim: usize,
    pub warnings: Vec<String>,
}

pub fn prepare_task(spec: &TaskSpec, seed: u64) -> Result<PreparedTask> {
    let dataset = spec.source.load(derive_path(seed, &[tag("source")]))?;
    let split = SplitSpec {
        seed: derive_path(seed, &[tag("split")]),
        ..spec.split
    };
    let parts = split_dataset(&dataset, &split)?;
    let validation = parts
        .validation
        .ok_or_else(|| Error::config(format!("task `{}` has no validation partition", spec.name)))?;
    let test = parts
        .test
        .ok_or_else(|| Error::config(format!("task `{}` has no test partition", spec.name)))?;
    let train = if spec.noise.is_none() {
        parts.train
    } else {
        spec.noise
            .apply(&parts.train, derive_path(seed, &[tag("train-noise")]))?
    };
    let calibration_noisy_labels = match &parts.calibration {
        None => None,
        Some(cal) if spec.noise.is_none() => Some(cal.observed_labels().to_vec()),
        Some(cal) => Some(
            spec.noise
                .apply(cal, derive_path(seed, &[tag("calibration-noise")]))?
                .observed_labels()
                .to_vec(),
        ),
    };

    let features = FeaturePipeline::fit(
        &train,
        &FeatureOptions {
            seed: derive_path(seed, &[tag("features")]),
            ..spec.features
        },
    )?;
    let clean_part = |ds: &Dataset| -> Result<Part> {
        Ok(Part {
            x: features.transform(ds)?,
            labels: ds.truth_or_observed().to_vec(),
            truth: ds.true_labels().map(<[usize]>::to_vec),
        })
    };
    Ok(PreparedTask {
        name: spec.name.clone(),
        seed,
        n_classes: dataset.n_classes(),
        train: Part {
            x: features.transform(&train)?,
            labels: train.observed_labels().to_vec(),
            truth: train.true_labels().map(<[usize]>::to_vec),
        },
        validation: clean_part(&validation)?,
        test: clean_part(&test)?,
        calibration: parts.calibration.as_ref().map(clean_part).transpose()?,
        calibration_noisy_labels,
        indices: parts.indices,
        feature_dim: features.output_dim(),
        warnings: parts.warnings,
    })
}

impl PreparedTask {
    /// Builds the calibration set for `mode`, or `None` when the task has no
    /// calibration partition.
    pub fn calibration_set(&self, mode: CalibrationMode) -> Result<Option<CalibrationSet>> {
        let Some(cal) = &self.calibration else {
            return Ok(None);
        };
        let labels = if mode.noisy {
            self.calibration_noisy_labels.as_ref().expect("set with the partition")
        } else {
            &cal.labels
        };
        let rows: Vec<usize> = match mode.size {
            Some(k) if k < cal.n() => {
                let seed = derive_path(self.seed, &[tag("calibration-subsample"), k as u64]);
                let mut rows = stratified_order(&cal.labels, self.n_classes, seed);
                rows.truncate(k);
                rows.sort_unstable();
                rows
            }
            _ => (0..cal.n()).collect(),
        };
        let x = cal.x.select(Axis(0), &rows);
        let y = rows.iter().map(|&i| labels[i]).collect();
        CalibrationSet::new(x, y, mode.noisy).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_task() -> TaskSpec {
        TaskSpec {
            name: "blobs".into(),
            source: TaskSource::Blobs(BlobsConfig {
                n: 300,
                class_weights: vec![0.8, 0.2],
                ..Default::default()
            }),
            noise: NoiseSpec::Uniform { rate: 0.2 },
            split: SplitSpec::with_test(0.6, 0.2, 0.2, 0),
            features: FeatureOptions {
                rff_components: Some(20),
                seed: 0,
            },
        }
    }

    #[test]
    fn noise_spec_parsing() {
        assert_eq!("none".parse::<NoiseSpec>().unwrap(), NoiseSpec::None);
        assert_eq!(
            "uniform:0.2".parse::<NoiseSpec>().unwrap(),
            NoiseSpec::Uniform { rate: 0.2 }
        );
        assert_eq!("flip:5".parse::<NoiseSpec>().unwrap(), NoiseSpec::Flip { per_class: 5 });
        assert_eq!(
            "per_class:0.1,0.3".parse::<NoiseSpec>().unwrap(),
            NoiseSpec::PerClass { rates: vec![0.1, 0.3] }
        );
        assert!("uniform:x".parse::<NoiseSpec>().is_err());
        let s = NoiseSpec::PerClass { rates: vec![0.1, 0.3] };
        assert_eq!(s.to_string().parse::<NoiseSpec>().unwrap(), s);
    }

    #[test]
    fn prepared_partitions() {
        let t = prepare_task(&small_task(), 3).unwrap();
        assert_eq!(
            t.train.n() + t.validation.n() + t.test.n() + t.calibration.as_ref().unwrap().n(),
            300
        );
        assert_eq!(t.train.x.ncols(), 20);
        // only the training labels are corrupted
        assert!(t.train.mislabel_mask().unwrap().iter().any(|&m| m));
        assert!(t.validation.mislabel_mask().unwrap().iter().all(|&m| !m));
        assert!(t.test.mislabel_mask().unwrap().iter().all(|&m| !m));
        let again = prepare_task(&small_task(), 3).unwrap();
        assert_eq!(again.train.x, t.train.x);
        assert_eq!(again.train.labels, t.train.labels);
    }

    #[test]
    fn calibration_modes() {
        let t = prepare_task(&small_task(), 5).unwrap();
        let cal = t.calibration.as_ref().unwrap();
        let clean = t.calibration_set(CalibrationMode::default()).unwrap().unwrap();
        assert_eq!(clean.len(), cal.n());
        assert!(!clean.is_noisy());
        let noisy = t
            .calibration_set(CalibrationMode {
                noisy: true,
                size: None,
            })
            .unwrap()
            .unwrap();
        assert_ne!(noisy.data().1, clean.data().1);
        let small = t
            .calibration_set(CalibrationMode {
                noisy: false,
                size: Some(10),
            })
            .unwrap()
            .unwrap();
        assert_eq!(small.len(), 10);
        let capped = t
            .calibration_set(CalibrationMode {
                noisy: false,
                size: Some(10_000),
            })
            .unwrap()
            .unwrap();
        assert_eq!(capped.len(), cal.n());
    }
}
