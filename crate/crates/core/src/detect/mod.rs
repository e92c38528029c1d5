//! Model-probing detectors: a probe measured on an ensemble of trained
//! models, aggregated into one trust score per example, with an optional
//! calibration or adjustment step applied to every ensemble member first.

mod engine;
mod scores;
mod spec;

pub use engine::{
    fit_ensemble, probe_confidences, probe_example, run_detector, run_detector_detailed, score_aum, score_cleanlab,
    score_consensus, score_ensemble, score_small_loss, trust_value, CalibrationSet, DetectorRun, MemberOutput,
    TrainView, TrainedEnsemble,
};
pub use scores::{detection_summary, DetectionSummary, Provenance, TrustScores};
pub use spec::{Addon, Aggregation, DetectorKind, DetectorSpec, Ensemble, Probe};
