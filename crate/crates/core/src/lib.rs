//! Detection of mislabeled training examples with model-probing detectors,
//! optionally calibrating the probed models, and a detection, filtering and
//! training benchmark to evaluate them.

pub mod calibrate;
pub mod data;
pub mod detect;
pub mod error;
pub mod features;
pub mod learner;
pub mod pipeline;
pub mod rng;

pub use error::{Error, ErrorKind, Result};
