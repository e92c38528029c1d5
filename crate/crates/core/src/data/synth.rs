use std::f64::consts::PI;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Two interleaving half circles. Class 0 is the lower moon, centred on
/// `(1, -0.5)` relative to the upper one, and receives
/// `round(n * minority_fraction)` points. Angles are evenly spaced on each
/// arc, jitter is isotropic Gaussian, and row order is shuffled.
pub fn make_two_moons(n: usize, minority_fraction: f64, noise_std: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::config("two moons needs n >= 2"));
    }
    if !(minority_fraction > 0.0 && minority_fraction < 0.5) {
        return Err(Error::config(format!(
            "minority_fraction must lie in (0, 0.5), got {minority_fraction}"
        )));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::config("noise_std must be finite and non-negative"));
    }
    let n_lower = (n as f64 * minority_fraction).round() as usize;
    if n_lower == 0 {
        return Err(Error::config("n * minority_fraction rounds to zero examples"));
    }
    let n_upper = n - n_lower;

    let mut rng = seeded(seed);
    let mut points: Vec<([f64; 2], usize)> = Vec::with_capacity(n);
    for k in 0..n_lower {
        let t = arc_angle(k, n_lower);
        points.push(([1.0 - t.cos(), 1.0 - t.sin() - 0.5], 0));
    }
    for k in 0..n_upper {
        let t = arc_angle(k, n_upper);
        points.push(([t.cos(), t.sin()], 1));
    }
    if noise_std > 0.0 {
        let jitter = Normal::new(0.0, noise_std).expect("valid std");
        for (p, _) in points.iter_mut() {
            p[0] += jitter.sample(&mut rng);
            p[1] += jitter.sample(&mut rng);
        }
    }
    points.shuffle(&mut rng);

    let x = Array2::from_shape_fn((n, 2), |(i, j)| points[i].0[j]);
    let y: Vec<usize> = points.iter().map(|p| p.1).collect();
    Dataset::from_matrix(&x, y.clone(), Some(y), 2)
}

fn arc_angle(k: usize, count: usize) -> f64 {
    if count == 1 {
        0.0
    } else {
        PI * k as f64 / (count - 1) as f64
    }
}

/// Isotropic Gaussian clusters, one per class, with centres evenly spaced on
/// a circle of radius `separation` in the first two coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobsConfig {
    pub n: usize,
    /// Relative class sizes; normalised internally.
    pub class_weights: Vec<f64>,
    pub n_features: usize,
    pub separation: f64,
    pub cluster_std: f64,
    pub seed: u64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            class_weights: vec![0.9, 0.1],
            n_features: 2,
            separation: 1.5,
            cluster_std: 1.0,
            seed: 0,
        }
    }
}

pub fn make_blobs(cfg: &BlobsConfig) -> Result<Dataset> {
    let c = cfg.class_weights.len();
    if c < 2 {
        return Err(Error::config("blobs need at least two classes"));
    }
    if cfg.n_features < 2 {
        return Err(Error::config("blobs need at least two features"));
    }
    if cfg.class_weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return Err(Error::config("class weights must be positive"));
    }
    let counts = apportion(cfg.n, &cfg.class_weights);
    if counts.contains(&0) {
        return Err(Error::config("a blob class receives zero examples"));
    }
    let noise =
        Normal::new(0.0, cfg.cluster_std).map_err(|_| Error::config("cluster_std must be finite and non-negative"))?;
    let mut rng = seeded(cfg.seed);
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::with_capacity(cfg.n);
    for (class, &count) in counts.iter().enumerate() {
        let angle = 2.0 * PI * class as f64 / c as f64;
        let mut center = vec![0.0; cfg.n_features];
        center[0] = cfg.separation * angle.cos();
        center[1] = cfg.separation * angle.sin();
        for _ in 0..count {
            let x = center.iter().map(|m| m + noise.sample(&mut rng)).collect();
            rows.push((x, class));
        }
    }
    rows.shuffle(&mut rng);
    let x = Array2::from_shape_fn((cfg.n, cfg.n_features), |(i, j)| rows[i].0[j]);
    let y: Vec<usize> = rows.iter().map(|r| r.1).collect();
    Dataset::from_matrix(&x, y.clone(), Some(y), c)
}

/// Largest-remainder apportionment of `n` items to the given weights.
pub(crate) fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest = n - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        out[i] += 1;
        rest -= 1;
    }
    out
}
