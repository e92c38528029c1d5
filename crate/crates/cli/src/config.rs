use std::path::{Path, PathBuf};

use mislabel::data::{load_csv_with, BlobsConfig, CsvOptions, Dataset, SplitSpec};
use mislabel::detect::{Addon, DetectorKind};
use mislabel::features::FeatureOptions;
use mislabel::learner::TrainConfig;
use mislabel::pipeline::{CalibrationMode, NoiseSpec, PipelineConfig, TaskSource, TaskSpec};
use mislabel::rng::{derive_path, tag};
use mislabel::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CalArgs, DataArgs};

/// Reads a JSON config. A manifest from an earlier run is unwrapped to the
/// resolved config it records.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("command").is_some() {
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
    }
    Ok(serde_json::from_value(value)?)
}

pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), |p| load_json(p))
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a T,
    outputs: &'a [String],
    warnings: &'a [String],
}

pub const MANIFEST: &str = "manifest.json";

/// Records the resolved configuration of a run next to its outputs. The
/// manifest can be fed back through `--config` to reproduce them.
pub fn write_manifest<T: Serialize>(
    dir: &Path,
    command: &str,
    seed: u64,
    config: &T,
    outputs: &[String],
    warnings: &[String],
) -> Result<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        outputs,
        warnings,
    };
    let path = dir.join(MANIFEST);
    std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").map_err(|e| Error::io(&path, e))
}

pub fn parse_list<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    items.iter().map(|s| s.parse()).collect()
}

pub fn synth_source(name: &str) -> Result<TaskSource> {
    match name {
        "two-moons" | "moons" | "two_moons" => Ok(TaskSource::TwoMoons {
            n: 100,
            minority_fraction: 0.1,
            noise_std: 0.1,
        }),
        "blobs" => Ok(TaskSource::Blobs(BlobsConfig::default())),
        other => Err(Error::config(format!("unknown generator `{other}` (two-moons, blobs)"))),
    }
}

fn set_n(source: &mut TaskSource, n: usize) -> Result<()> {
    match source {
        TaskSource::TwoMoons { n: m, .. } => *m = n,
        TaskSource::Blobs(cfg) => cfg.n = n,
        TaskSource::Csv { .. } => return Err(Error::config("--n applies to synthetic data only")),
    }
    Ok(())
}

/// Applies the data flags to a source and its noise.
pub fn apply_data_args(source: &mut TaskSource, noise: &mut NoiseSpec, args: &DataArgs) -> Result<()> {
    if let Some(name) = &args.synth {
        *source = synth_source(name)?;
    }
    if let Some(path) = &args.data {
        *source = TaskSource::Csv {
            path: path.clone(),
            label_column: args.label_column.clone().unwrap_or_else(|| "label".into()),
            text_columns: args.text_columns.clone(),
            true_label_column: args.truth_column.clone(),
        };
        if args.noise.is_none() {
            *noise = NoiseSpec::None;
        }
    } else if args.label_column.is_some() || args.truth_column.is_some() || !args.text_columns.is_empty() {
        return Err(Error::config("column flags need --data"));
    }
    if let Some(n) = args.n {
        set_n(source, n)?;
    }
    if let Some(s) = &args.noise {
        *noise = s.parse()?;
    }
    Ok(())
}

/// A dataset source together with its label corruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub source: TaskSource,
    #[serde(default)]
    pub noise: NoiseSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: synth_source("two-moons").expect("known generator"),
            noise: NoiseSpec::Flip { per_class: 5 },
        }
    }
}

impl DataConfig {
    pub fn apply(&mut self, args: &DataArgs) -> Result<()> {
        apply_data_args(&mut self.source, &mut self.noise, args)
    }

    /// Loads the clean data and corrupts it; without noise the labels are
    /// kept exactly as loaded.
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        let clean = self.source.load(derive_path(seed, &[tag("data")]))?;
        if self.noise.is_none() {
            Ok(clean)
        } else {
            self.noise.apply(&clean, derive_path(seed, &[tag("noise")]))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CalibrationSource {
    None,
    /// A fresh clean draw from the synthetic generator.
    Synthetic {
        size: usize,
    },
    Csv {
        path: PathBuf,
        label_column: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectConfig {
    pub data: DataConfig,
    pub detector: DetectorKind,
    pub addon: Addon,
    pub train: TrainConfig,
    /// Random Fourier components on the standardised features.
    pub rff_components: Option<usize>,
    pub calibration: CalibrationSource,
    pub calibration_noisy: bool,
    pub seed: u64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            detector: DetectorKind::Aum,
            addon: Addon::Baseline,
            train: TrainConfig::default(),
            rff_components: FeatureOptions::default().rff_components,
            calibration: CalibrationSource::Synthetic { size: 100 },
            calibration_noisy: false,
            seed: 0,
        }
    }
}

impl DetectConfig {
    pub fn apply(&mut self, data: &DataArgs, cal: &CalArgs, detector: Option<&str>, addon: Option<&str>) -> Result<()> {
        self.data.apply(data)?;
        if let Some(d) = detector {
            self.detector = d.parse()?;
        }
        if let Some(a) = addon {
            self.addon = a.parse()?;
        }
        let csv_source = matches!(self.data.source, TaskSource::Csv { .. });
        if let Some(path) = &cal.cal_data {
            self.calibration = CalibrationSource::Csv {
                path: path.clone(),
                label_column: data.label_column.clone().unwrap_or_else(|| "label".into()),
            };
        } else if csv_source && matches!(self.calibration, CalibrationSource::Synthetic { .. }) {
            self.calibration = CalibrationSource::None;
        }
        match cal.cal_size {
            Some(0) => self.calibration = CalibrationSource::None,
            Some(_) if csv_source => return Err(Error::config("--cal-size needs a synthetic source; use --cal-data")),
            Some(size) => self.calibration = CalibrationSource::Synthetic { size },
            None => {}
        }
        if let Some(noisy) = cal.cal_noisy {
            self.calibration_noisy = noisy;
        }
        Ok(())
    }

    /// The calibration examples with labels indexed like `train`.
    pub fn load_calibration(&self, train: &Dataset, seed: u64) -> Result<Option<Dataset>> {
        let cal = match &self.calibration {
            CalibrationSource::None => return Ok(None),
            CalibrationSource::Synthetic { size } => {
                let mut source = self.data.source.clone();
                set_n(&mut source, *size)
                    .map_err(|_| Error::config("a synthetic calibration set needs a synthetic source"))?;
                source.load(derive_path(seed, &[tag("calibration")]))?
            }
            CalibrationSource::Csv { path, label_column } => {
                let text_columns = match &self.data.source {
                    TaskSource::Csv { text_columns, .. } => text_columns.clone(),
                    _ => Vec::new(),
                };
                let raw = load_csv_with(
                    path,
                    &CsvOptions {
                        label_column: label_column.clone(),
                        text_columns,
                        true_label_column: None,
                    },
                )?;
                reindex_labels(&raw, train)?
            }
        };
        if self.calibration_noisy && !self.data.noise.is_none() {
            let noisy = self
                .data
                .noise
                .apply(&cal, derive_path(seed, &[tag("calibration-noise")]))?;
            return Ok(Some(noisy));
        }
        Ok(Some(cal))
    }
}

fn reindex_labels(cal: &Dataset, train: &Dataset) -> Result<Dataset> {
    let names = train.label_names();
    let map: Vec<usize> = cal
        .label_names()
        .iter()
        .map(|l| {
            names
                .iter()
                .position(|t| t == l)
                .ok_or_else(|| Error::data(format!("calibration label `{l}` does not occur in the training data")))
        })
        .collect::<Result<_>>()?;
    let labels = cal.observed_labels().iter().map(|&c| map[c]).collect();
    Dataset::with_label_names(cal.columns().to_vec(), labels, None, names.to_vec())
}

/// Imbalanced blobs with uniform label noise and a held-out calibration
/// split: the default task of `calibrate-eval` and `pipeline`.
pub fn default_task() -> TaskSpec {
    TaskSpec {
        name: "blobs".into(),
        source: TaskSource::Blobs(BlobsConfig::default()),
        noise: NoiseSpec::Uniform { rate: 0.2 },
        split: SplitSpec::with_test(0.5, 0.3, 0.2, 0),
        features: FeatureOptions {
            rff_components: Some(100),
            seed: 0,
        },
    }
}

pub fn apply_task_args(task: &mut TaskSpec, args: &DataArgs) -> Result<()> {
    apply_data_args(&mut task.source, &mut task.noise, args)?;
    if let Some(name) = &args.synth {
        task.name = name.clone();
    } else if let Some(path) = &args.data {
        task.name = path
            .file_stem()
            .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned());
    }
    Ok(())
}

pub fn apply_calibration_mode(mode: &mut CalibrationMode, cal: &CalArgs) -> Result<()> {
    if cal.cal_data.is_some() {
        return Err(Error::config(
            "--cal-data is only supported by detect; the calibration split comes from the task",
        ));
    }
    match cal.cal_size {
        Some(0) => return Err(Error::config("--cal-size must be positive here")),
        Some(k) => mode.size = Some(k),
        None => {}
    }
    if let Some(noisy) = cal.cal_noisy {
        mode.noisy = noisy;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrateConfig {
    pub task: TaskSpec,
    pub train: TrainConfig,
    pub calibration: CalibrationMode,
    pub bins: usize,
    pub seed: u64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            task: default_task(),
            train: TrainConfig::default(),
            calibration: CalibrationMode::default(),
            bins: mislabel::calibrate::DEFAULT_ECE_BINS,
            seed: 0,
        }
    }
}

/// A single pipeline plus an optional quantile sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRunConfig {
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub quantiles: Vec<f64>,
}

impl Default for PipelineRunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig {
                task: default_task(),
                detector: DetectorKind::Aum,
                addon: Addon::Baseline,
                detector_train: TrainConfig::default(),
                final_train: TrainConfig::default(),
                quantile: 0.1,
                calibration: CalibrationMode::default(),
                seed: 0,
            },
            quantiles: Vec::new(),
        }
    }
}
