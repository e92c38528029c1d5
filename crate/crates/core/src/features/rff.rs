use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Monte Carlo sample count used when none is given.
pub const DEFAULT_RFF_COMPONENTS: usize = 1000;

/// Random Fourier approximation of the RBF kernel `exp(-gamma ||x - y||^2)`:
/// `z(x) = sqrt(2 / D) cos(W x + b)`, `W ~ N(0, 2 gamma)`, `b ~ U[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFourierFeatures {
    gamma: f64,
    /// D x d
    weights: Array2<f64>,
    offsets: Array1<f64>,
}

/// Fits the map with bandwidth `gamma = 1 / (d * Var(X))`, the variance being
/// taken over every entry of `train_features`.
pub fn fit_rff(train_features: &Array2<f64>, components: usize, seed: u64) -> Result<RandomFourierFeatures> {
    let (n, d) = train_features.dim();
    if d == 0 || n == 0 {
        return Err(Error::data("random features need a non-empty feature matrix"));
    }
    if components == 0 {
        return Err(Error::config("random features need at least one component"));
    }
    let mean = train_features.mean().unwrap();
    let var = train_features.mapv(|v| (v - mean).powi(2)).mean().unwrap();
    if var.is_nan() || var <= 0.0 || var.is_infinite() {
        return Err(Error::data(
            "feature matrix has zero total variance; RFF bandwidth undefined",
        ));
    }
    let gamma = 1.0 / (d as f64 * var);
    Ok(RandomFourierFeatures::sample(d, components, gamma, seed))
}

impl RandomFourierFeatures {
    pub fn sample(input_dim: usize, components: usize, gamma: f64, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let normal = Normal::new(0.0, (2.0 * gamma).sqrt()).expect("finite bandwidth");
        let weights = Array2::from_shape_simple_fn((components, input_dim), || normal.sample(&mut rng));
        let uniform = Uniform::new(0.0, 2.0 * PI).expect("valid range");
        let offsets = Array1::from_shape_simple_fn(components, || uniform.sample(&mut rng));
        Self {
            gamma,
            weights,
            offsets,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn output_dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn offsets(&self) -> &Array1<f64> {
        &self.offsets
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let scale = (2.0 / self.output_dim() as f64).sqrt();
        let mut z = x.dot(&self.weights.t());
        z += &self.offsets.view().insert_axis(Axis(0));
        z.mapv_inplace(|v| scale * v.cos());
        Ok(z)
    }
}
