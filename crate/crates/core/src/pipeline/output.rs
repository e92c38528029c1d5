use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::bench::BenchReport;
use super::search::Variant;
use crate::error::{Error, Result};

pub const TRIALS_CSV: &str = "trials.csv";
pub const WINNERS_CSV: &str = "winners.csv";
pub const REFERENCES_CSV: &str = "references.csv";
pub const BOXPLOT_CSV: &str = "boxplot.csv";
pub const MINORITY_CSV: &str = "minority_curve.csv";
pub const SCATTER_CSV: &str = "scatter.csv";
pub const WILCOXON_CSV: &str = "wilcoxon.csv";
pub const SUMMARY_JSON: &str = "summary.json";

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Invariant(format!("writing {}: {other:?}", path.display())),
    }
}

#[derive(Serialize)]
struct ReferenceRow<'a> {
    task: &'a str,
    repeat: usize,
    reference: &'a str,
    n_train: usize,
    quantile: Option<f64>,
    learning_rate: f64,
    l2: f64,
    validation_log_loss: f64,
    test_log_loss: f64,
    test_balanced_accuracy: f64,
}

#[derive(Serialize)]
struct BoxRow<'a> {
    detector: &'a str,
    variant: &'a str,
    task: &'a str,
    repeat: usize,
    normalized_score: f64,
}

#[derive(Serialize)]
struct WilcoxonCsvRow<'a> {
    variant: &'a str,
    detector: &'a str,
    metric: &'a str,
    n_pairs: usize,
    median_difference: f64,
    wins: usize,
    draws: usize,
    losses: usize,
    statistic: f64,
    p_two_sided: f64,
    p_improvement: f64,
    p_harm: f64,
    significant: bool,
}

/// Writes every table of a bench report into `dir` and returns the paths.
pub fn write_bench_outputs(report: &BenchReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut out = |name: &str| {
        let p = dir.join(name);
        written.push(p.clone());
        p
    };

    write_rows(&out(TRIALS_CSV), &report.trials)?;
    write_rows(&out(WINNERS_CSV), &report.winners)?;

    let mut refs = Vec::new();
    for t in &report.references {
        for kind in super::run::ReferenceKind::ALL {
            if let Some(r) = t.references.get(kind) {
                refs.push(ReferenceRow {
                    task: &t.task,
                    repeat: t.repeat,
                    reference: kind.name(),
                    n_train: r.evaluation.n_train,
                    quantile: r.quantile,
                    learning_rate: r.final_config.learning_rate,
                    l2: r.final_config.l2,
                    validation_log_loss: r.evaluation.validation_log_loss,
                    test_log_loss: r.evaluation.test_log_loss,
                    test_balanced_accuracy: r.evaluation.test_balanced_accuracy,
                });
            }
        }
    }
    write_rows(&out(REFERENCES_CSV), &refs)?;

    let boxes: Vec<BoxRow> = report
        .winners
        .iter()
        .filter_map(|w| {
            Some(BoxRow {
                detector: &w.detector,
                variant: &w.variant,
                task: &w.task,
                repeat: w.repeat,
                normalized_score: w.normalized_score?,
            })
        })
        .collect();
    write_rows(&out(BOXPLOT_CSV), &boxes)?;
    write_rows(&out(MINORITY_CSV), &report.curves)?;
    write_scatter(report, &out(SCATTER_CSV))?;

    let wil: Vec<WilcoxonCsvRow> = report
        .comparisons
        .iter()
        .map(|c| WilcoxonCsvRow {
            variant: &c.variant,
            detector: &c.detector,
            metric: &c.metric,
            n_pairs: c.n_pairs,
            median_difference: c.median_difference,
            wins: c.wins,
            draws: c.draws,
            losses: c.losses,
            statistic: c.two_sided.statistic,
            p_two_sided: c.two_sided.p_value,
            p_improvement: c.improvement.p_value,
            p_harm: c.harm.p_value,
            significant: c.two_sided.significant,
        })
        .collect();
    write_rows(&out(WILCOXON_CSV), &wil)?;

    let summary = serde_json::json!({
        "config": report.config,
        "elapsed_seconds": report.elapsed_seconds,
        "references": report.references,
        "winners": report.winners,
        "comparisons": report.comparisons,
        "warnings": report.warnings,
    });
    let path = out(SUMMARY_JSON);
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    Ok(written)
}

/// One row per (task, repeat, detector) with a column per plain addon.
fn write_scatter(report: &BenchReport, path: &Path) -> Result<()> {
    let columns: Vec<String> = report
        .config
        .addons
        .iter()
        .map(|&a| Variant::new(a).to_string())
        .collect();
    let mut table: BTreeMap<(String, usize, String), Vec<Option<f64>>> = BTreeMap::new();
    for w in &report.winners {
        let Some(col) = columns.iter().position(|c| *c == w.variant) else {
            continue;
        };
        let row = table
            .entry((w.task.clone(), w.repeat, w.detector.clone()))
            .or_insert_with(|| vec![None; columns.len()]);
        row[col] = w.normalized_score;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["task".to_string(), "repeat".into(), "detector".into()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for ((task, repeat, detector), values) in table {
        let mut rec = vec![task, repeat.to_string(), detector];
        rec.extend(values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
