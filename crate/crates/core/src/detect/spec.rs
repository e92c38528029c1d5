use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::TrainConfig;

/// Per-example measurement taken on a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Probe {
    /// `f(x)_y - max_{c != y} f(x)_c`
    Margin,
    /// `f(x)_y`
    Confidence,
    /// `1[argmax_c f(x)_c == y]`
    Accuracy,
    /// `-ln f(x)_y`; stored negated as a trust score.
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Ensemble {
    /// One training run probed at every checkpoint.
    Progressive,
    /// `bags` models, each trained on a uniform sample without replacement
    /// of `bag_fraction * n` examples.
    Independent {
        bags: usize,
        bag_fraction: f64,
    },
    None,
}

impl Ensemble {
    pub const DEFAULT_BAGS: usize = 5;
    pub const DEFAULT_BAG_FRACTION: f64 = 0.632;

    pub fn independent() -> Self {
        Ensemble::Independent {
            bags: Self::DEFAULT_BAGS,
            bag_fraction: Self::DEFAULT_BAG_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean over checkpoints.
    Sum,
    /// Mean over the models for which the example was out of bag.
    MeanOob,
    None,
}

/// Optional transform of each ensemble member's confidences before probing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Addon {
    Baseline,
    Adjust,
    Isotonic,
    Sigmoid,
}

impl Addon {
    pub const ALL: [Addon; 4] = [Addon::Baseline, Addon::Adjust, Addon::Isotonic, Addon::Sigmoid];

    pub fn needs_calibration_set(self) -> bool {
        matches!(self, Addon::Isotonic | Addon::Sigmoid)
    }

    pub fn name(self) -> &'static str {
        match self {
            Addon::Baseline => "baseline",
            Addon::Adjust => "adjust",
            Addon::Isotonic => "isotonic",
            Addon::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for Addon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Addon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "none" => Ok(Addon::Baseline),
            "adjust" | "adjusted" => Ok(Addon::Adjust),
            "isotonic" | "iso" => Ok(Addon::Isotonic),
            "sigmoid" | "platt" | "sig" => Ok(Addon::Sigmoid),
            other => Err(Error::config(format!("unknown addon `{other}`"))),
        }
    }
}

/// The four benchmarked detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Aum,
    CleanLab,
    Consensus,
    SmallLoss,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::Aum,
        DetectorKind::CleanLab,
        DetectorKind::Consensus,
        DetectorKind::SmallLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Aum => "aum",
            DetectorKind::CleanLab => "cleanlab",
            DetectorKind::Consensus => "consensus",
            DetectorKind::SmallLoss => "small_loss",
        }
    }

    /// (probe, aggregation) of the detector; the ensemble follows from it.
    fn blocks(self) -> (Probe, Aggregation) {
        match self {
            DetectorKind::Aum => (Probe::Margin, Aggregation::Sum),
            DetectorKind::CleanLab => (Probe::Confidence, Aggregation::MeanOob),
            DetectorKind::Consensus => (Probe::Accuracy, Aggregation::MeanOob),
            DetectorKind::SmallLoss => (Probe::Loss, Aggregation::None),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "aum" => Ok(DetectorKind::Aum),
            "cleanlab" | "clean_lab" => Ok(DetectorKind::CleanLab),
            "consensus" => Ok(DetectorKind::Consensus),
            "small_loss" | "smallloss" => Ok(DetectorKind::SmallLoss),
            other => Err(Error::config(format!("unknown detector `{other}`"))),
        }
    }
}

impl FromStr for Probe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "margin" => Ok(Probe::Margin),
            "confidence" => Ok(Probe::Confidence),
            "accuracy" => Ok(Probe::Accuracy),
            "loss" => Ok(Probe::Loss),
            other => Err(Error::config(format!("unknown probe kind `{other}`"))),
        }
    }
}

/// Probe, ensemble and aggregation of a model-probing detector, plus the
/// addon applied to every probed model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub probe: Probe,
    pub ensemble: Ensemble,
    pub aggregation: Aggregation,
    pub addon: Addon,
    pub train_config: TrainConfig,
    pub seed: u64,
    /// Allows (probe, ensemble, aggregation) combinations other than the four
    /// named detectors.
    #[serde(default)]
    pub custom: bool,
}

impl DetectorSpec {
    pub fn named(kind: DetectorKind, addon: Addon, train_config: TrainConfig, seed: u64) -> Self {
        let (probe, aggregation) = kind.blocks();
        let ensemble = match kind {
            DetectorKind::Aum => Ensemble::Progressive,
            DetectorKind::CleanLab | DetectorKind::Consensus => Ensemble::independent(),
            DetectorKind::SmallLoss => Ensemble::None,
        };
        Self {
            probe,
            ensemble,
            aggregation,
            addon,
            train_config,
            seed,
            custom: false,
        }
    }

    pub fn custom(
        probe: Probe,
        ensemble: Ensemble,
        aggregation: Aggregation,
        addon: Addon,
        train_config: TrainConfig,
        seed: u64,
    ) -> Self {
        Self {
            probe,
            ensemble,
            aggregation,
            addon,
            train_config,
            seed,
            custom: true,
        }
    }

    /// The named detector this spec describes, if any.
    pub fn kind(&self) -> Option<DetectorKind> {
        DetectorKind::ALL.into_iter().find(|k| {
            let (probe, aggregation) = k.blocks();
            let ensemble_ok = matches!(
                (k, self.ensemble),
                (DetectorKind::Aum, Ensemble::Progressive)
                    | (
                        DetectorKind::CleanLab | DetectorKind::Consensus,
                        Ensemble::Independent { .. }
                    )
                    | (DetectorKind::SmallLoss, Ensemble::None)
            );
            probe == self.probe && aggregation == self.aggregation && ensemble_ok
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config.validate()?;
        let structural = matches!(
            (self.ensemble, self.aggregation),
            (Ensemble::Progressive, Aggregation::Sum)
                | (Ensemble::Independent { .. }, Aggregation::MeanOob)
                | (Ensemble::None, Aggregation::None)
        );
        if !structural {
            return Err(Error::config(format!(
                "aggregation {:?} is incompatible with ensemble {:?}",
                self.aggregation, self.ensemble
            )));
        }
        if let Ensemble::Independent { bags, bag_fraction } = self.ensemble {
            if bags < 2 {
                return Err(Error::config("independent ensembles need at least 2 bags"));
            }
            if !(bag_fraction > 0.0 && bag_fraction < 1.0) {
                return Err(Error::config(format!("bag_fraction {bag_fraction} outside (0, 1)")));
            }
        }
        if !self.custom && self.kind().is_none() {
            return Err(Error::config(
                "probe/ensemble/aggregation do not match a named detector; set `custom` to allow it",
            ));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let base = match self.kind() {
            Some(k) if !self.custom => k.name().to_string(),
            _ => format!("{:?}-{:?}", self.probe, self.aggregation).to_lowercase(),
        };
        format!("{base}+{}", self.addon)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: DetectorSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_specs_match_their_rows() {
        for kind in DetectorKind::ALL {
            let spec = DetectorSpec::named(kind, Addon::Baseline, TrainConfig::default(), 0);
            spec.validate().unwrap();
            assert_eq!(spec.kind(), Some(kind));
        }
    }

    #[test]
    fn mismatched_rows_need_custom() {
        let mut spec = DetectorSpec::named(DetectorKind::Aum, Addon::Baseline, TrainConfig::default(), 0);
        spec.probe = Probe::Confidence;
        assert!(spec.validate().is_err());
        spec.custom = true;
        spec.validate().unwrap();
        spec.aggregation = Aggregation::MeanOob;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bag_parameters_checked() {
        let mut spec = DetectorSpec::named(DetectorKind::CleanLab, Addon::Baseline, TrainConfig::default(), 0);
        spec.ensemble = Ensemble::Independent {
            bags: 1,
            bag_fraction: 0.5,
        };
        assert!(spec.validate().is_err());
        spec.ensemble = Ensemble::Independent {
            bags: 3,
            bag_fraction: 1.0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = DetectorSpec::named(DetectorKind::Consensus, Addon::Sigmoid, TrainConfig::default(), 42);
        let back = DetectorSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn parse_names() {
        assert_eq!("small-loss".parse::<DetectorKind>().unwrap(), DetectorKind::SmallLoss);
        assert_eq!("platt".parse::<Addon>().unwrap(), Addon::Sigmoid);
        assert!("gradient".parse::<Probe>().is_err());
    }
}
