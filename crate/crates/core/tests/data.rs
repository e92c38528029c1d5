use mislabel::data::{
    apply_transition_noise, flip_labels, make_blobs, make_two_moons, BlobsConfig, NoiseTransitionMatrix,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn blobs(n: usize, weights: Vec<f64>) -> mislabel::data::Dataset {
    make_blobs(&BlobsConfig {
        n,
        class_weights: weights,
        ..BlobsConfig::default()
    })
    .unwrap()
}

/// Pearson goodness of fit of the (true, observed) counts against the
/// transition matrix, one multinomial per true class.
fn transition_chi_square(t: &NoiseTransitionMatrix, seed: u64) -> (f64, usize) {
    let clean = blobs(30_000, vec![0.5, 0.3, 0.2]);
    let noisy = apply_transition_noise(&clean, t, seed).unwrap();
    let truth = noisy.true_labels().unwrap();
    let c = t.n_classes();
    let mut counts = vec![vec![0usize; c]; c];
    for (&y, &o) in truth.iter().zip(noisy.observed_labels()) {
        counts[y][o] += 1;
    }
    let mut stat = 0.0;
    let mut dof = 0;
    for (y, row) in counts.iter().enumerate() {
        let n_y: usize = row.iter().sum();
        let cells: Vec<usize> = (0..c).filter(|&o| t.entry(o, y) > 0.0).collect();
        for &o in &cells {
            let expected = n_y as f64 * t.entry(o, y);
            stat += (row[o] as f64 - expected).powi(2) / expected;
        }
        for o in (0..c).filter(|o| !cells.contains(o)) {
            assert_eq!(row[o], 0, "impossible transition {y} -> {o}");
        }
        dof += cells.len() - 1;
    }
    (stat, dof)
}

#[test]
fn uniform_corruption_matches_its_matrix() {
    let t = NoiseTransitionMatrix::uniform(3, 0.3).unwrap();
    let (stat, dof) = transition_chi_square(&t, 5);
    let critical = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn per_class_corruption_matches_its_matrix() {
    let t = NoiseTransitionMatrix::per_class(&[0.05, 0.2, 0.4]).unwrap();
    let (stat, dof) = transition_chi_square(&t, 8);
    let critical = ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn corruption_keeps_features_and_truth() {
    let clean = blobs(500, vec![0.7, 0.3]);
    let noisy = apply_transition_noise(&clean, &NoiseTransitionMatrix::uniform(2, 0.2).unwrap(), 1).unwrap();
    assert_eq!(noisy.numeric_matrix().unwrap(), clean.numeric_matrix().unwrap());
    assert_eq!(noisy.true_labels().unwrap(), clean.observed_labels());
    let flipped = noisy.n_mislabeled().unwrap();
    assert!((50..=150).contains(&flipped), "{flipped} flips at rate 0.2");
}

#[test]
fn planted_flips_are_exact() {
    let clean = make_two_moons(100, 0.1, 0.1, 3).unwrap();
    let noisy = flip_labels(&clean, 5, 4).unwrap();
    let mask = noisy.mislabel_mask().unwrap();
    let truth = noisy.true_labels().unwrap();
    for c in 0..2 {
        let flipped = (0..100).filter(|&i| mask[i] && truth[i] == c).count();
        assert_eq!(flipped, 5);
    }
    assert_eq!(noisy.n_mislabeled(), Some(10));
}
