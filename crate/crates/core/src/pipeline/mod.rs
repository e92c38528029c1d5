//! Detection, filtering and training: reference runs, normalized scores,
//! random hyperparameter search, benchmark sweeps and the statistics used to
//! compare detectors.

mod bench;
mod filter;
mod output;
mod run;
mod search;
mod stats;
mod task;

pub use bench::{
    paired_scores, run_benchmark, variant_correlation, BenchConfig, BenchReport, ComparisonRow, CurveRow,
    TaskReferences, WinnerRow, CURVE_RESOLUTION,
};
pub use filter::{
    filter_by_trust, filter_indices, minority_removal_curve, removal_count, MinorityCurve, QUANTILE_GRID,
};
pub use output::{
    write_bench_outputs, write_rows, BOXPLOT_CSV, MINORITY_CSV, REFERENCES_CSV, SCATTER_CSV, SUMMARY_JSON, TRIALS_CSV,
    WILCOXON_CSV, WINNERS_CSV,
};
pub use run::{
    check_quantile, filter_and_train, normalize_score, random_scores, run_pipeline, run_reference, run_three_stage,
    train_and_evaluate, Evaluation, PipelineConfig, PipelineResult, ReferenceKind, ReferenceResult, References,
};
pub use search::{
    draw_samples, evaluate_rows, random_search, random_trust_scores, search_references, select_best, HyperSample,
    SearchOutcome, SearchRequest, SearchSpace, SearchWinner, TrialRow, Variant,
};
pub use stats::{
    average_ranks, spearman_correlation, wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative, WilcoxonResult,
    EXACT_WILCOXON_MAX_N,
};
pub use task::{prepare_task, CalibrationMode, NoiseSpec, Part, PreparedTask, TaskSource, TaskSpec};
