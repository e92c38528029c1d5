use std::path::{Path, PathBuf};

use log::{info, warn};
use mislabel::calibrate::{calibrate_model, classwise_ece, reliability_bins, write_reliability_csv, CalibrationMethod};
use mislabel::data::{write_csv, DatasetManifest};
use mislabel::detect::{detection_summary, run_detector, Addon, CalibrationSet, DetectorKind, DetectorSpec, TrainView};
use mislabel::features::{FeatureOptions, FeaturePipeline};
use mislabel::learner::{argmax_rows, balanced_accuracy_metric, log_loss_metric, predict_confidences, train_sgd};
use mislabel::pipeline::{
    prepare_task, run_benchmark, run_pipeline, write_bench_outputs, BenchConfig, NoiseSpec, PipelineResult, References,
};
use mislabel::rng::{derive_path, tag};
use mislabel::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::config::{
    apply_calibration_mode, apply_task_args, load_json, load_or_default, parse_list, write_manifest, CalibrateConfig,
    DataConfig, DetectConfig, PipelineRunConfig, MANIFEST,
};
use crate::{svg, BenchCmd, CalibrateCmd, Common, DataCmd, DetectCmd, PipelineCmd};

fn out_dir(common: &Common) -> Result<PathBuf> {
    std::fs::create_dir_all(&common.out).map_err(|e| Error::io(&common.out, e))?;
    Ok(common.out.clone())
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String> {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(name.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DataRun {
    #[serde(flatten)]
    data: DataConfig,
    #[serde(default)]
    seed: u64,
}

impl Default for DataRun {
    fn default() -> Self {
        Self {
            data: DataConfig {
                noise: NoiseSpec::None,
                ..DataConfig::default()
            },
            seed: 0,
        }
    }
}

fn write_dataset(cmd: &DataCmd, command: &str, file: &str) -> Result<()> {
    let mut cfg: DataRun = load_or_default(cmd.common.config.as_ref())?;
    if let Some(s) = cmd.common.seed {
        cfg.seed = s;
    }
    cfg.data.apply(&cmd.data)?;
    if command == "corrupt" && cfg.data.noise.is_none() {
        return Err(Error::config("corrupt needs --noise"));
    }
    let dir = out_dir(&cmd.common)?;
    let ds = cfg.data.load(cfg.seed)?;
    write_csv(&ds, dir.join(file))?;
    let mut described = DatasetManifest::describe(&ds, format!("{:?}", cfg.data.source), Some(cfg.seed));
    described.params = serde_json::to_value(&cfg.data)?;
    described.save(dir.join("dataset.json"))?;
    info!(
        "{command}: {} examples, {} classes, {} mislabeled -> {}",
        ds.n(),
        ds.n_classes(),
        ds.n_mislabeled().unwrap_or(0),
        dir.join(file).display()
    );
    write_manifest(
        &dir,
        command,
        cfg.seed,
        &cfg,
        &[file.into(), "dataset.json".into()],
        &[],
    )
}

pub fn synth(cmd: &DataCmd) -> Result<()> {
    write_dataset(cmd, "synth", "dataset.csv")
}

pub fn corrupt(cmd: &DataCmd) -> Result<()> {
    write_dataset(cmd, "corrupt", "corrupted.csv")
}

#[derive(Serialize)]
struct DetectionReport {
    detector: String,
    n: usize,
    n_mislabeled: usize,
    /// Planted mislabels among the `n_mislabeled` least trusted examples.
    hits_at_k: usize,
    auc: f64,
    /// Positions of the planted mislabels in the ascending trust order.
    flip_ranks: Vec<usize>,
}

pub fn detect(cmd: &DetectCmd) -> Result<()> {
    let mut cfg: DetectConfig = load_or_default(cmd.common.config.as_ref())?;
    if let Some(s) = cmd.common.seed {
        cfg.seed = s;
    }
    cfg.apply(&cmd.data, &cmd.cal, cmd.detector.as_deref(), cmd.addon.as_deref())?;
    cfg.train.validate()?;
    if cfg.addon.needs_calibration_set() && matches!(cfg.calibration, crate::config::CalibrationSource::None) {
        return Err(Error::MissingCalibrationSet(cfg.addon.to_string()));
    }

    let ds = cfg.data.load(cfg.seed)?;
    let cal = if cfg.addon.needs_calibration_set() {
        cfg.load_calibration(&ds, cfg.seed)?
    } else {
        None
    };
    let features = FeaturePipeline::fit(
        &ds,
        &FeatureOptions {
            rff_components: cfg.rff_components,
            seed: derive_path(cfg.seed, &[tag("features")]),
        },
    )?;
    let x = features.transform(&ds)?;
    let cal_set = match &cal {
        Some(c) => Some(CalibrationSet::new(
            features.transform(c)?,
            c.observed_labels().to_vec(),
            cfg.calibration_noisy,
        )?),
        None => None,
    };
    let spec = DetectorSpec::named(
        cfg.detector,
        cfg.addon,
        cfg.train,
        derive_path(cfg.seed, &[tag("detector")]),
    );
    let train = TrainView::new(&x, ds.observed_labels(), ds.n_classes())?;
    let scores = run_detector(train, cal_set.as_ref(), &spec)?;

    let dir = out_dir(&cmd.common)?;
    scores.write_csv(dir.join("scores.csv"))?;
    let mut outputs = vec!["scores.csv".to_string()];
    if let Some(mask) = ds.mislabel_mask() {
        let s = detection_summary(&scores, &mask)?;
        let order = scores.ascending_order();
        let flip_ranks = order
            .iter()
            .enumerate()
            .filter(|(_, &i)| mask[i])
            .map(|(r, _)| r)
            .collect();
        let report = DetectionReport {
            detector: spec.label(),
            n: scores.len(),
            n_mislabeled: s.n_mislabeled,
            hits_at_k: s.hits_at_k,
            auc: s.auc,
            flip_ranks,
        };
        info!(
            "{}: {}/{} planted mislabels in the bottom {}",
            report.detector, report.hits_at_k, report.n_mislabeled, report.n_mislabeled
        );
        outputs.push(write_json(&dir, "detection.json", &report)?);
    }
    let warnings = scores.provenance().warnings.clone();
    for w in &warnings {
        warn!("{w}");
    }
    write_manifest(&dir, "detect", cfg.seed, &cfg, &outputs, &warnings)
}

#[derive(Serialize)]
struct CalibrationRow {
    method: String,
    classwise_ece: f64,
    test_log_loss: f64,
    test_balanced_accuracy: f64,
}

pub fn calibrate_eval(cmd: &CalibrateCmd) -> Result<()> {
    let mut cfg: CalibrateConfig = load_or_default(cmd.common.config.as_ref())?;
    if let Some(s) = cmd.common.seed {
        cfg.seed = s;
    }
    apply_task_args(&mut cfg.task, &cmd.data)?;
    apply_calibration_mode(&mut cfg.calibration, &cmd.cal)?;
    if cfg.bins == 0 {
        return Err(Error::config("bins must be at least 1"));
    }
    let task = prepare_task(&cfg.task, cfg.seed)?;
    let train_cfg = cfg.train.with_seed(derive_path(cfg.seed, &[tag("model")]));
    let (model, _) = train_sgd(&task.train.x, &task.train.labels, task.n_classes, &train_cfg)?;
    let cal = task
        .calibration_set(cfg.calibration)?
        .ok_or_else(|| Error::MissingCalibrationSet("isotonic".into()))?;
    let (cal_x, cal_y) = cal.data();
    let test_y = &task.test.labels;

    let dir = out_dir(&cmd.common)?;
    let mut rows = Vec::new();
    let mut outputs = Vec::new();
    let mut warnings = task.warnings.clone();
    let mut record = |name: &str, probs: Array2<f64>| -> Result<()> {
        let bins: Vec<_> = (0..task.n_classes)
            .flat_map(|c| {
                reliability_bins(&probs, test_y, c, cfg.bins)
                    .into_iter()
                    .map(move |b| (c, b))
            })
            .collect();
        let file = format!("reliability_{name}.csv");
        write_reliability_csv(&bins, dir.join(&file))?;
        outputs.push(file);
        rows.push(CalibrationRow {
            method: name.into(),
            classwise_ece: classwise_ece(&probs, test_y, cfg.bins),
            test_log_loss: log_loss_metric(&probs, test_y),
            test_balanced_accuracy: balanced_accuracy_metric(&argmax_rows(&probs), test_y),
        });
        Ok(())
    };
    record("uncalibrated", predict_confidences(&model, &task.test.x)?)?;
    for method in [CalibrationMethod::Isotonic, CalibrationMethod::Sigmoid] {
        let calibrated = calibrate_model(&model, cal_x, cal_y, method)?;
        warnings.extend(calibrated.calibrator.warnings.iter().cloned());
        let name = match method {
            CalibrationMethod::Isotonic => "isotonic",
            CalibrationMethod::Sigmoid => "sigmoid",
        };
        record(name, predict_confidences(&calibrated, &task.test.x)?)?;
    }
    for r in &rows {
        info!(
            "{:<13} ece {:.4}  log loss {:.4}",
            r.method, r.classwise_ece, r.test_log_loss
        );
    }
    outputs.push(write_json(&dir, "calibration.json", &rows)?);
    write_manifest(&dir, "calibrate-eval", cfg.seed, &cfg, &outputs, &warnings)
}

#[derive(Serialize)]
struct QuantileRow {
    quantile: f64,
    n_kept: usize,
    validation_log_loss: f64,
    test_log_loss: f64,
    test_balanced_accuracy: f64,
    normalized_score: Option<f64>,
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    selected: &'a PipelineResult,
    references: &'a References,
}

pub fn pipeline(cmd: &PipelineCmd) -> Result<()> {
    let mut cfg: PipelineRunConfig = load_or_default(cmd.common.config.as_ref())?;
    let p = &mut cfg.pipeline;
    if let Some(s) = cmd.common.seed {
        p.seed = s;
    }
    apply_task_args(&mut p.task, &cmd.data)?;
    apply_calibration_mode(&mut p.calibration, &cmd.cal)?;
    if let Some(d) = &cmd.detector {
        p.detector = d.parse()?;
    }
    if let Some(a) = &cmd.addon {
        p.addon = a.parse()?;
    }
    if !cmd.quantiles.is_empty() {
        cfg.quantiles = cmd.quantiles.clone();
    }
    let quantiles = if cfg.quantiles.is_empty() {
        vec![cfg.pipeline.quantile]
    } else {
        cfg.quantiles.clone()
    };

    let mut runs = Vec::new();
    for &q in &quantiles {
        let mut single = cfg.pipeline.clone();
        single.quantile = q;
        runs.push(run_pipeline(&single)?);
    }
    let best = (0..runs.len())
        .min_by(|&a, &b| {
            let (ra, rb) = (&runs[a].0, &runs[b].0);
            ra.evaluation
                .validation_log_loss
                .total_cmp(&rb.evaluation.validation_log_loss)
                .then(ra.quantile.total_cmp(&rb.quantile))
        })
        .expect("at least one quantile");

    let dir = out_dir(&cmd.common)?;
    let rows: Vec<QuantileRow> = runs
        .iter()
        .map(|(r, _)| QuantileRow {
            quantile: r.quantile,
            n_kept: r.kept.len(),
            validation_log_loss: r.evaluation.validation_log_loss,
            test_log_loss: r.evaluation.test_log_loss,
            test_balanced_accuracy: r.evaluation.test_balanced_accuracy,
            normalized_score: r.normalized_score,
        })
        .collect();
    mislabel::pipeline::write_rows(&dir.join("pipeline.csv"), &rows)?;
    let (result, references) = &runs[best];
    info!(
        "{} q={} test log loss {:.4} normalized {}",
        result.detector,
        result.quantile,
        result.evaluation.test_log_loss,
        result
            .normalized_score
            .map_or_else(|| "n/a".into(), |s| format!("{s:.1}"))
    );
    let summary = PipelineSummary {
        selected: result,
        references,
    };
    let outputs = vec!["pipeline.csv".to_string(), write_json(&dir, "result.json", &summary)?];
    write_manifest(&dir, "pipeline", cfg.pipeline.seed, &cfg, &outputs, &result.warnings)
}

pub fn bench(cmd: &BenchCmd) -> Result<()> {
    let path = cmd
        .common
        .config
        .as_ref()
        .ok_or_else(|| Error::config("bench needs --config <path>"))?;
    let mut cfg: BenchConfig = load_json(path)?;
    if let Some(s) = cmd.common.seed {
        cfg.seed = s;
    }
    if !cmd.detector.is_empty() {
        cfg.detectors = parse_list::<DetectorKind>(&cmd.detector)?;
    }
    if !cmd.addon.is_empty() {
        cfg.addons = parse_list::<Addon>(&cmd.addon)?;
    }
    if !cmd.quantiles.is_empty() {
        cfg.quantiles = cmd.quantiles.clone();
    }
    if !cmd.cal_size.is_empty() {
        cfg.calibration_sizes = cmd.cal_size.clone();
    }
    if let Some(noisy) = cmd.cal_noisy {
        cfg.noisy_calibration = noisy;
    }
    cfg.validate()?;

    let dir = out_dir(&cmd.common)?;
    info!(
        "bench: {} tasks x {} repeats x {} detectors x {} variants x {} samples x {} quantiles",
        cfg.tasks.len(),
        cfg.repeats,
        cfg.detectors.len(),
        cfg.variants().len(),
        cfg.samples,
        cfg.quantiles.len()
    );
    let report = run_benchmark(&cfg)?;
    let failed = report.trials.iter().filter(|t| !t.is_ok()).count();
    if failed > 0 {
        warn!(
            "{failed} of {} trials failed; see {}",
            report.trials.len(),
            mislabel::pipeline::TRIALS_CSV
        );
    }
    let mut outputs: Vec<String> = write_bench_outputs(&report, &dir)?
        .iter()
        .map(|p| file_name(p))
        .collect();
    outputs.extend(svg::render_all(&dir)?.iter().map(|p| file_name(p)));
    for c in report.comparisons.iter().filter(|c| c.detector == "all") {
        info!(
            "{:<20} vs baseline: {}/{}/{} wins/draws/losses, p = {:.4}",
            c.variant, c.wins, c.draws, c.losses, c.two_sided.p_value
        );
    }
    info!("bench finished in {:.1}s", report.elapsed_seconds);
    write_manifest(&dir, "bench", cfg.seed, &cfg, &outputs, &report.warnings)
}

pub fn report(common: &Common) -> Result<()> {
    let dir = &common.out;
    if !dir.join(MANIFEST).exists() && !dir.join(mislabel::pipeline::BOXPLOT_CSV).exists() {
        return Err(Error::data(format!("{} holds no bench output", dir.display())));
    }
    let written = svg::render_all(dir)?;
    for p in &written {
        info!("wrote {}", p.display());
    }
    Ok(())
}
