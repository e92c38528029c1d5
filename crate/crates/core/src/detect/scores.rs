use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::spec::DetectorSpec;
use crate::error::{Error, Result};

/// How a detector run was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    /// `None` for scores not produced by a model-probing detector (random,
    /// oracle).
    pub spec: Option<DetectorSpec>,
    pub detector: String,
    pub calibration_size: Option<usize>,
    pub calibration_noisy: Option<bool>,
    pub warnings: Vec<String>,
}

/// Per-example trust scores, higher meaning more likely correctly labeled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustScores {
    scores: Vec<f64>,
    oob_counts: Option<Vec<usize>>,
    imputed: Vec<bool>,
    provenance: Provenance,
}

impl TrustScores {
    pub(crate) fn build(
        scores: Vec<f64>,
        oob_counts: Option<Vec<usize>>,
        imputed: Vec<bool>,
        provenance: Provenance,
    ) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Invariant(format!("trust score {i} is not finite")));
        }
        debug_assert_eq!(imputed.len(), scores.len());
        Ok(Self {
            scores,
            oob_counts,
            imputed,
            provenance,
        })
    }

    /// Wraps externally computed scores.
    pub fn from_values(scores: Vec<f64>, detector: impl Into<String>) -> Result<Self> {
        let n = scores.len();
        Self::build(
            scores,
            None,
            vec![false; n],
            Provenance {
                detector: detector.into(),
                ..Default::default()
            },
        )
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn oob_counts(&self) -> Option<&[usize]> {
        self.oob_counts.as_deref()
    }

    /// Examples that were never out of bag and received the median score.
    pub fn imputed(&self) -> &[bool] {
        &self.imputed
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Indices sorted from least to most trusted; ties by index.
    pub fn ascending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(a.cmp(&b)));
        idx
    }

    /// The `k` least trusted examples.
    pub fn bottom_k(&self, k: usize) -> Vec<usize> {
        let mut order = self.ascending_order();
        order.truncate(k);
        order
    }

    /// Applies a transform to every score, keeping the rest of the record.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::build(
            self.scores.iter().map(|&s| f(s)).collect(),
            self.oob_counts.clone(),
            self.imputed.clone(),
            self.provenance.clone(),
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::new();
        writeln!(out, "index,score,oob_count,flags").expect("write to memory");
        for (i, s) in self.scores.iter().enumerate() {
            let oob = self.oob_counts.as_ref().map(|c| c[i].to_string()).unwrap_or_default();
            let flag = if self.imputed[i] { "median_fallback" } else { "" };
            writeln!(out, "{i},{s},{oob},{flag}").expect("write to memory");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Quality of a score ranking against a known mislabel mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub n_mislabeled: usize,
    /// Mislabeled examples among the `n_mislabeled` least trusted.
    pub hits_at_k: usize,
    /// Probability that a random mislabeled example is ranked below a random
    /// clean one (ties count half).
    pub auc: f64,
}

pub fn detection_summary(scores: &TrustScores, mislabeled: &[bool]) -> Result<DetectionSummary> {
    if mislabeled.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: mislabeled.len(),
        });
    }
    let k = mislabeled.iter().filter(|&&m| m).count();
    let hits_at_k = scores.bottom_k(k).iter().filter(|&&i| mislabeled[i]).count();

    // Mann-Whitney U over midranks.
    let order = scores.ascending_order();
    let s = scores.scores();
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && s[order[end]] == s[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            if !mislabeled[i] {
                rank_sum += mid;
            }
        }
        start = end;
    }
    let n_clean = (scores.len() - k) as f64;
    let auc = if k == 0 || n_clean == 0.0 {
        f64::NAN
    } else {
        (rank_sum - n_clean * (n_clean + 1.0) / 2.0) / (n_clean * k as f64)
    };
    Ok(DetectionSummary {
        n_mislabeled: k,
        hits_at_k,
        auc,
    })
}
