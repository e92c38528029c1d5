//! Softmax linear classifier trained by mini-batch SGD on the
//! L2-regularised log loss, with per-epoch checkpoints.

mod metrics;

pub use metrics::{balanced_accuracy_metric, log_loss_metric, LOG_LOSS_CLIP};

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2: 1e-3,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            checkpoint_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2 must be non-negative"));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.checkpoint_every == 0 {
            return Err(Error::config("epochs, batch_size and checkpoint_every must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Anything that maps feature rows to class-probability rows.
pub trait ConfidenceModel {
    fn n_classes(&self) -> usize;

    fn predict_confidences(&self, x: &Array2<f64>) -> Result<Array2<f64>>;

    fn predict(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.predict_confidences(x)?))
    }
}

/// `f(x) = softmax(W x + b)` with `W` of shape `C x p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearModel {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            weights: Array2::zeros((n_classes, n_features)),
            bias: Array1::zeros(n_classes),
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols()
    }

    /// Affine class scores (pre-softmax).
    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.ncols(),
            });
        }
        let mut s = x.dot(&self.weights.t());
        s += &self.bias.view().insert_axis(Axis(0));
        Ok(s)
    }
}

impl ConfidenceModel for LinearModel {
    fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    fn predict_confidences(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut s = self.scores(x.view())?;
        softmax_rows(&mut s);
        Ok(s)
    }
}

pub fn predict_confidences<M: ConfidenceModel + ?Sized>(model: &M, x: &Array2<f64>) -> Result<Array2<f64>> {
    model.predict_confidences(x)
}

/// In-place row softmax.
pub fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let z = row.sum();
        row /= z;
    }
}

/// Row-wise argmax, ties to the lowest class index.
pub fn argmax_rows(p: &Array2<f64>) -> Vec<usize> {
    p.rows().into_iter().map(argmax).collect()
}

pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Snapshots taken every `checkpoint_every` epochs, plus the mean training
/// loss of every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointTrace {
    pub snapshots: Vec<LinearModel>,
    pub epoch_losses: Vec<f64>,
}

impl CheckpointTrace {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Writes the `epoch,train_loss` log.
    pub fn write_metrics_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("epoch,train_loss\n");
        for (e, l) in self.epoch_losses.iter().enumerate() {
            out.push_str(&format!("{},{}\n", e + 1, l));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Gradient of the regularised objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Mean cross-entropy over the rows of `x` plus `(l2 / 2) ||W||^2`, and its
/// gradient. The bias is not regularised.
pub fn objective(model: &LinearModel, x: ArrayView2<'_, f64>, y: &[usize], l2: f64) -> Result<(f64, Gradient)> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let mut p = model.scores(x)?;
    softmax_rows(&mut p);
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        loss -= p[[i, yi]].max(f64::MIN_POSITIVE).ln();
        p[[i, yi]] -= 1.0;
    }
    let inv = 1.0 / n as f64;
    loss *= inv;
    loss += 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    let mut gw = p.t().dot(&x);
    gw *= inv;
    gw.scaled_add(l2, &model.weights);
    let gb = p.sum_axis(Axis(0)) * inv;
    Ok((loss, Gradient { weights: gw, bias: gb }))
}

/// Mini-batch SGD with a constant step. Rows are reshuffled every epoch from
/// a stream seeded by `config.seed`; weights start at zero.
pub fn train_sgd(
    x: &Array2<f64>,
    y: &[usize],
    n_classes: usize,
    config: &TrainConfig,
) -> Result<(LinearModel, CheckpointTrace)> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::data("cannot train on an empty set"));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::data(format!("label {bad} outside [0, {n_classes})")));
    }
    let n = x.nrows();
    let mut model = LinearModel::zeros(n_classes, x.ncols());
    let mut rng = seeded(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = CheckpointTrace {
        snapshots: Vec::with_capacity(config.epochs / config.checkpoint_every),
        epoch_losses: Vec::with_capacity(config.epochs),
    };
    let mut batch_y = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let xb = x.select(Axis(0), chunk);
            batch_y.clear();
            batch_y.extend(chunk.iter().map(|&i| y[i]));
            let (loss, grad) = objective(&model, xb.view(), &batch_y, config.l2)?;
            epoch_loss += loss * chunk.len() as f64;
            model.weights.scaled_add(-config.learning_rate, &grad.weights);
            model.bias.scaled_add(-config.learning_rate, &grad.bias);
        }
        let epoch_loss = epoch_loss / n as f64;
        if !epoch_loss.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        trace.epoch_losses.push(epoch_loss);
        if epoch % config.checkpoint_every == 0 {
            trace.snapshots.push(model.clone());
        }
    }
    Ok((model, trace))
}
