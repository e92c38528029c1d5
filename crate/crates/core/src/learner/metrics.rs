use ndarray::Array2;

/// Probabilities are clipped to `[LOG_LOSS_CLIP, 1 - LOG_LOSS_CLIP]` before
/// taking logs.
pub const LOG_LOSS_CLIP: f64 = 1e-15;

/// Mean negative log-probability of the true class.
pub fn log_loss_metric(probs: &Array2<f64>, y: &[usize]) -> f64 {
    assert_eq!(probs.nrows(), y.len(), "log loss needs one label per row");
    let total: f64 = y
        .iter()
        .enumerate()
        .map(|(i, &c)| -probs[[i, c]].clamp(LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP).ln())
        .sum();
    total / y.len() as f64
}

/// Mean per-class recall over the classes present in `y`.
pub fn balanced_accuracy_metric(predictions: &[usize], y: &[usize]) -> f64 {
    assert_eq!(predictions.len(), y.len(), "balanced accuracy needs equal lengths");
    let n_classes = y.iter().chain(predictions).max().map_or(0, |m| m + 1);
    let mut hits = vec![0usize; n_classes];
    let mut totals = vec![0usize; n_classes];
    for (&p, &t) in predictions.iter().zip(y) {
        totals[t] += 1;
        if p == t {
            hits[t] += 1;
        }
    }
    let (sum, k) = hits
        .iter()
        .zip(&totals)
        .filter(|(_, &t)| t > 0)
        .fold((0.0, 0usize), |(s, k), (&h, &t)| (s + h as f64 / t as f64, k + 1));
    sum / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn log_loss_values() {
        let perfect = array![[1.0, 0.0], [0.0, 1.0]];
        let l = log_loss_metric(&perfect, &[0, 1]);
        assert!(l > 0.0 && l < 1e-13);
        let uniform = array![[0.5, 0.5], [0.5, 0.5]];
        assert!((log_loss_metric(&uniform, &[0, 1]) - std::f64::consts::LN_2).abs() < 1e-6);
        let p = array![[0.9, 0.1]];
        assert!((log_loss_metric(&p, &[1]) - std::f64::consts::LN_10).abs() < 1e-6);
        let wrong = array![[1.0, 0.0]];
        assert!(log_loss_metric(&wrong, &[1]).is_finite());
    }

    #[test]
    fn balanced_accuracy_values() {
        assert_eq!(balanced_accuracy_metric(&[0, 1, 2, 1], &[0, 1, 2, 1]), 1.0);
        let y: Vec<usize> = (0..100).map(|i| usize::from(i >= 10)).collect();
        assert_eq!(balanced_accuracy_metric(&[1; 100], &y), 0.5);
        // class 0: 2/2, class 1: 1/2, class 2: 0/2
        let y = [0, 0, 1, 1, 2, 2];
        let p = [0, 0, 1, 0, 1, 0];
        assert!((balanced_accuracy_metric(&p, &y) - 0.5).abs() < 1e-15);
        // a class predicted but absent from y does not count
        assert_eq!(balanced_accuracy_metric(&[0, 2], &[0, 0]), 0.5);
    }
}
