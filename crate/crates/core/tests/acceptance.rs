//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr (bypassing the harness capture) and asserts its criterion.
//!
//! Run with `cargo test -p mislabel --test acceptance`.

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::Instant;

use mislabel::calibrate::{adjust_confidences, classwise_ece, pava};
use mislabel::data::{flip_labels, make_two_moons, BlobsConfig, SplitSpec};
use mislabel::detect::{
    run_detector, run_detector_detailed, Addon, CalibrationSet, DetectorKind, DetectorSpec, TrainView,
};
use mislabel::features::{fit_rff, FeatureOptions, FeaturePipeline};
use mislabel::learner::{objective, softmax_rows, train_sgd, LinearModel, TrainConfig};
use mislabel::pipeline::{
    minority_removal_curve, normalize_score, prepare_task, run_benchmark, variant_correlation, wilcoxon_signed_rank,
    BenchConfig, BenchReport, CalibrationMode, NoiseSpec, TaskSource, TaskSpec, QUANTILE_GRID,
};
use mislabel::rng::{derive_path, seeded, tag};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn emit(id: u32, pass: bool, detail: &str) {
    let line = format!("criterion {id}: {} — {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_two_moons_flips() {
    let start = Instant::now();
    let seeds = 20u64;
    let mut wins = 0;
    let mut minority_share = 0.0;
    for seed in 0..seeds {
        let clean = make_two_moons(100, 0.1, 0.1, seed).unwrap();
        let train = flip_labels(&clean, 5, seed + 1000).unwrap();
        let cal = make_two_moons(100, 0.1, 0.1, seed + 5000).unwrap();
        let fp = FeaturePipeline::fit(
            &train,
            &FeatureOptions {
                rff_components: Some(1000),
                seed,
            },
        )
        .unwrap();
        let x = fp.transform(&train).unwrap();
        let cal_set = CalibrationSet::new(fp.transform(&cal).unwrap(), cal.observed_labels().to_vec(), false).unwrap();
        let view = TrainView::new(&x, train.observed_labels(), 2).unwrap();
        let mask = train.mislabel_mask().unwrap();
        let counts = train.class_counts();
        let minority = (0..2).min_by_key(|&c| counts[c]).unwrap();

        let mut hits = [0usize; 2];
        for (k, addon) in [Addon::Baseline, Addon::Isotonic].into_iter().enumerate() {
            let spec = DetectorSpec::named(DetectorKind::Aum, addon, TrainConfig::default(), seed);
            let bottom = run_detector(view, Some(&cal_set), &spec).unwrap().bottom_k(10);
            hits[k] = bottom.iter().filter(|&&i| mask[i]).count();
            if addon == Addon::Baseline {
                let m = bottom
                    .iter()
                    .filter(|&&i| train.observed_labels()[i] == minority)
                    .count();
                minority_share += m as f64 / 10.0;
            }
        }
        if hits[1] > hits[0] {
            wins += 1;
        }
    }
    let win_rate = wins as f64 / seeds as f64;
    let minority_share = minority_share / seeds as f64;
    let secs = start.elapsed().as_secs_f64();
    let pass = win_rate >= 0.7 && minority_share >= 0.6 && secs < 60.0;
    emit(
        1,
        pass,
        &format!(
            "isotonic AUM beats baseline in {wins}/{seeds} seeds; baseline bottom-10 is {:.0}% minority; {secs:.1}s",
            100.0 * minority_share
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 2

fn blobs_task(
    name: &str,
    n: usize,
    weights: Vec<f64>,
    separation: f64,
    noise: NoiseSpec,
    split: SplitSpec,
) -> TaskSpec {
    TaskSpec {
        name: name.into(),
        source: TaskSource::Blobs(BlobsConfig {
            n,
            class_weights: weights,
            n_features: 2,
            separation,
            cluster_std: 1.0,
            seed: 0,
        }),
        noise,
        split,
        features: FeatureOptions {
            rff_components: Some(100),
            seed: 0,
        },
    }
}

#[test]
fn criterion_2_minority_removal() {
    let start = Instant::now();
    let spec = blobs_task(
        "blobs-90-10",
        1000,
        vec![0.9, 0.1],
        1.5,
        NoiseSpec::Uniform { rate: 0.2 },
        SplitSpec::with_test(0.5, 0.3, 0.2, 0),
    );
    let tasks: Vec<_> = (0..10u64).map(|s| prepare_task(&spec, s).unwrap()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in DetectorKind::ALL {
        let mut iso = Vec::new();
        let mut sig = Vec::new();
        for (seed, task) in tasks.iter().enumerate() {
            let cal = task.calibration_set(CalibrationMode::default()).unwrap();
            let view = TrainView::new(&task.train.x, &task.train.labels, 2).unwrap();
            let area = |addon| {
                let s = run_detector(
                    view,
                    cal.as_ref(),
                    &DetectorSpec::named(kind, addon, TrainConfig::default(), seed as u64),
                )
                .unwrap();
                minority_removal_curve(&s, &task.train.labels, 2)
                    .unwrap()
                    .area_above_diagonal
            };
            let base = area(Addon::Baseline);
            iso.push(base - area(Addon::Isotonic));
            sig.push(base - area(Addon::Sigmoid));
        }
        let (mi, ms) = (median(iso), median(sig));
        ok &= mi > 0.03;
        parts.push(format!("{} {mi:.3} (sigmoid, not gated: {ms:.3})", kind.name()));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = ok && secs < 300.0;
    emit(
        2,
        pass,
        &format!(
            "median area reduction, baseline minus isotonic: {}; {secs:.1}s",
            parts.join(", ")
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 3, 4, 8

fn suite_split() -> SplitSpec {
    SplitSpec::with_test(0.5, 0.3, 0.2, 0)
}

fn synthetic_suite() -> Vec<TaskSpec> {
    let u = |rate| NoiseSpec::Uniform { rate };
    vec![
        blobs_task("b2-90-u20", 1000, vec![0.9, 0.1], 1.5, u(0.2), suite_split()),
        blobs_task("b2-80-u10", 1000, vec![0.8, 0.2], 1.5, u(0.1), suite_split()),
        blobs_task("b2-95-u10", 1000, vec![0.95, 0.05], 2.0, u(0.1), suite_split()),
        blobs_task("b2-70-u30", 1000, vec![0.7, 0.3], 2.0, u(0.3), suite_split()),
        blobs_task("b3-60-u20", 1000, vec![0.6, 0.3, 0.1], 2.0, u(0.2), suite_split()),
        blobs_task(
            "b3-80-nar",
            1000,
            vec![0.8, 0.15, 0.05],
            2.5,
            NoiseSpec::PerClass {
                rates: vec![0.1, 0.2, 0.3],
            },
            suite_split(),
        ),
        blobs_task(
            "b5-u20",
            1000,
            vec![0.4, 0.25, 0.15, 0.12, 0.08],
            2.5,
            u(0.2),
            suite_split(),
        ),
        blobs_task(
            "b5-u10",
            1000,
            vec![0.6, 0.1, 0.1, 0.1, 0.1],
            3.0,
            u(0.1),
            suite_split(),
        ),
    ]
}

fn suite_config(
    tasks: Vec<TaskSpec>,
    addons: Vec<Addon>,
    noisy: bool,
    sizes: Vec<usize>,
    samples: usize,
) -> BenchConfig {
    BenchConfig {
        tasks,
        repeats: 1,
        detectors: DetectorKind::ALL.to_vec(),
        addons,
        noisy_calibration: noisy,
        calibration_sizes: sizes,
        samples,
        quantiles: QUANTILE_GRID.to_vec(),
        search_space: Default::default(),
        detector_train: TrainConfig::default(),
        final_train: TrainConfig::default(),
        bags: None,
        alpha: 0.95,
        seed: 11,
    }
}

/// One sweep serves criteria 3, 4 and 8.
fn suite_report() -> &'static (BenchReport, f64) {
    static REPORT: OnceLock<(BenchReport, f64)> = OnceLock::new();
    REPORT.get_or_init(|| {
        let start = Instant::now();
        let cfg = suite_config(synthetic_suite(), Addon::ALL.to_vec(), true, vec![], 20);
        let report = run_benchmark(&cfg).unwrap();
        (report, start.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_3_calibration_improves_pipeline() {
    let (report, secs) = suite_report();
    let pooled = |v: &str| report.comparison(v, "all").unwrap();
    let iso = pooled("isotonic");
    let sig = pooled("sigmoid");
    let adj = pooled("adjust");
    let calibrated_ok = [iso, sig]
        .iter()
        .all(|c| c.two_sided.p_value < 0.05 && c.median_difference < 0.0);
    let adjust_ok = adj.improvement.p_value >= 0.05;
    let pass = calibrated_ok && adjust_ok && *secs < 1800.0;
    report_line3(pass, iso, sig, adj, *secs);
    assert!(pass);
}

fn report_line3(
    pass: bool,
    iso: &mislabel::pipeline::ComparisonRow,
    sig: &mislabel::pipeline::ComparisonRow,
    adj: &mislabel::pipeline::ComparisonRow,
    secs: f64,
) {
    let fmt = |c: &mislabel::pipeline::ComparisonRow| {
        format!(
            "{} {}/{}/{} p={:.2e}",
            c.variant, c.wins, c.draws, c.losses, c.two_sided.p_value
        )
    };
    emit(
        3,
        pass,
        &format!(
            "{} pairs; {}; {}; {} (improvement p={:.3}); {secs:.0}s",
            iso.n_pairs,
            fmt(iso),
            fmt(sig),
            fmt(adj),
            adj.improvement.p_value
        ),
    );
}

#[test]
fn criterion_4_noisy_calibration_not_harmful() {
    let (report, _) = suite_report();
    let rows: Vec<_> = ["isotonic@noisy", "sigmoid@noisy"]
        .iter()
        .map(|v| report.comparison(v, "all").unwrap())
        .collect();
    let pass = rows.iter().all(|c| c.harm.p_value >= 0.05);
    let detail: Vec<String> = rows
        .iter()
        .map(|c| {
            format!(
                "{} harm p={:.3} ({}/{}/{})",
                c.variant, c.harm.p_value, c.wins, c.draws, c.losses
            )
        })
        .collect();
    emit(4, pass, &detail.join("; "));
    assert!(pass);
}

#[test]
fn criterion_8_isotonic_sigmoid_correlation() {
    let (report, _) = suite_report();
    let rho = variant_correlation(&report.winners, "isotonic", "sigmoid").unwrap();
    let pass = rho > 0.7;
    report_rho(pass, rho);
    assert!(pass);
}

fn report_rho(pass: bool, rho: f64) {
    emit(
        8,
        pass,
        &format!("Spearman correlation of isotonic vs sigmoid normalized scores {rho:.3}"),
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_calibration_set_size() {
    let start = Instant::now();
    // 1200 calibration rows per task so that the 1000-example subsample exists.
    let split = SplitSpec {
        train_fraction: 0.25,
        validation_fraction: 0.6,
        calibration_fraction_of_validation: 0.5,
        test_fraction: 0.15,
        seed: 0,
    };
    let tasks: Vec<TaskSpec> = synthetic_suite()
        .into_iter()
        .map(|mut t| {
            if let TaskSource::Blobs(cfg) = &mut t.source {
                cfg.n = 4000;
            }
            t.split = split;
            t
        })
        .collect();
    let cfg = suite_config(
        tasks,
        vec![Addon::Baseline, Addon::Isotonic],
        false,
        vec![10, 100, 1000],
        5,
    );
    let report = run_benchmark(&cfg).unwrap();
    let at = |size: usize| {
        let v = format!("isotonic@clean:{size}");
        median(report.winners_of(&v).filter_map(|w| w.normalized_score).collect())
    };
    let (s10, s100, s1000) = (at(10), at(100), at(1000));
    let pass = (s100 - s1000).abs() <= 5.0 && s10 > s100;
    emit(
        5,
        pass,
        &format!(
            "median normalized score at 10/100/1000 calibration examples: {s10:.1}/{s100:.1}/{s1000:.1}; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 6

/// Isotonic fit by the max-min formula over block averages.
fn isotonic_minmax(y: &[f64], w: &[f64]) -> Vec<f64> {
    let n = y.len();
    let avg = |a: usize, b: usize| {
        let (s, t) = (a..=b).fold((0.0, 0.0), |(s, t), k| (s + w[k] * y[k], t + w[k]));
        s / t
    };
    (0..n)
        .map(|i| {
            (0..=i)
                .map(|a| (i..n).map(|b| avg(a, b)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// p-value by listing every sign assignment of the ranks.
fn wilcoxon_enumerated(diffs: &[f64]) -> f64 {
    let d: Vec<f64> = diffs.iter().copied().filter(|v| *v != 0.0).collect();
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as f64;
            let tied = abs.iter().filter(|b| *b == a).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let (mut low, mut high) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        if w <= observed + 1e-9 {
            low += 1;
        }
        if w >= observed - 1e-9 {
            high += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (2.0 * (low.min(high) as f64) / total).min(1.0)
}

fn softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

fn probs_of(model: &LinearModel, x: &Array2<f64>, i: usize) -> Vec<f64> {
    let s: Vec<f64> = (0..model.weights.nrows())
        .map(|c| model.bias[c] + (0..x.ncols()).map(|j| model.weights[[c, j]] * x[[i, j]]).sum::<f64>())
        .collect();
    softmax(&s)
}

fn margin(p: &[f64], y: usize) -> f64 {
    let other = p
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != y)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    p[y] - other
}

fn detector_oracle_error() -> f64 {
    let mut rng = seeded(3);
    let (n, d, c) = (60, 4, 3);
    let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let y: Vec<usize> = (0..n)
        .map(|i| {
            if rng.random::<f64>() < 0.2 {
                rng.random_range(0..c)
            } else {
                i % c
            }
        })
        .collect();
    let cfg = TrainConfig {
        epochs: 6,
        ..TrainConfig::default()
    };
    let view = TrainView::new(&x, &y, c).unwrap();
    let mut worst: f64 = 0.0;
    for kind in DetectorKind::ALL {
        let spec = DetectorSpec::named(kind, Addon::Baseline, cfg, 42);
        let run = run_detector_detailed(view, None, &spec).unwrap();
        let got = run.scores.scores();
        let expected: Vec<f64> = match kind {
            DetectorKind::Aum => {
                let (_, trace) = train_sgd(&x, &y, c, &cfg.with_seed(derive_path(42, &[tag("progressive")]))).unwrap();
                (0..n)
                    .map(|i| {
                        trace
                            .snapshots
                            .iter()
                            .map(|m| margin(&probs_of(m, &x, i), y[i]))
                            .sum::<f64>()
                            / trace.snapshots.len() as f64
                    })
                    .collect()
            }
            DetectorKind::SmallLoss => {
                let (m, _) = train_sgd(&x, &y, c, &cfg.with_seed(derive_path(42, &[tag("single")]))).unwrap();
                (0..n).map(|i| probs_of(&m, &x, i)[y[i]].max(1e-15).ln()).collect()
            }
            DetectorKind::CleanLab | DetectorKind::Consensus => {
                let mut sums = vec![0.0; n];
                let mut counts = vec![0usize; n];
                for (b, member) in run.members.iter().enumerate() {
                    let in_bag = member.in_bag.as_ref().unwrap();
                    let rows: Vec<usize> = (0..n).filter(|&i| in_bag[i]).collect();
                    let xb = x.select(ndarray::Axis(0), &rows);
                    let yb: Vec<usize> = rows.iter().map(|&i| y[i]).collect();
                    let seed = derive_path(42, &[tag("bag-train"), b as u64]);
                    let (m, _) = train_sgd(&xb, &yb, c, &cfg.with_seed(seed)).unwrap();
                    for i in (0..n).filter(|&i| !in_bag[i]) {
                        let p = probs_of(&m, &x, i);
                        sums[i] += if kind == DetectorKind::CleanLab {
                            p[y[i]]
                        } else {
                            let top = (0..c).max_by(|&a, &b| p[a].total_cmp(&p[b]).then(b.cmp(&a))).unwrap();
                            f64::from(top == y[i])
                        };
                        counts[i] += 1;
                    }
                }
                let observed: Vec<f64> = (0..n)
                    .filter(|&i| counts[i] > 0)
                    .map(|i| sums[i] / counts[i] as f64)
                    .collect();
                let fill = median(observed);
                (0..n)
                    .map(|i| {
                        if counts[i] > 0 {
                            sums[i] / counts[i] as f64
                        } else {
                            fill
                        }
                    })
                    .collect()
            }
        };
        for (g, e) in got.iter().zip(&expected) {
            worst = worst.max((g - e).abs());
        }
    }
    worst
}

fn adjust_oracle_error() -> f64 {
    let mut rng = seeded(9);
    let (n, c) = (40, 4);
    let mut p = Array2::from_shape_fn((n, c), |_| rng.random::<f64>() + 0.01);
    for mut row in p.rows_mut() {
        let z = row.sum();
        row /= z;
    }
    let y: Vec<usize> = (0..n).map(|i| i % c).collect();
    let out = adjust_confidences(&p, &y).unwrap();
    let means: Vec<f64> = (0..c)
        .map(|j| {
            let rows: Vec<usize> = (0..n).filter(|&i| y[i] == j).collect();
            rows.iter().map(|&i| p[[i, j]]).sum::<f64>() / rows.len() as f64
        })
        .collect();
    let top = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let centred: Vec<f64> = (0..c).map(|j| p[[i, j]] - means[j] + top).collect();
        let z: f64 = centred.iter().sum();
        for (j, v) in centred.iter().enumerate() {
            worst = worst.max((out.probs[[i, j]] - v / z).abs());
        }
    }
    worst
}

#[test]
fn criterion_6_exact_oracles() {
    let mut rng = seeded(6);

    let mut pava_err: f64 = 0.0;
    for _ in 0..300 {
        let n = rng.random_range(1..=8);
        let y: Vec<f64> = (0..n).map(|_| (rng.random_range(0..5) as f64) / 4.0).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(1..4) as f64).collect();
        for (a, b) in pava(&y, &w).iter().zip(isotonic_minmax(&y, &w)) {
            pava_err = pava_err.max((a - b).abs());
        }
    }

    let detector_err = detector_oracle_error();

    let mut wilcoxon_exact = true;
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let got = wilcoxon_signed_rank(&a, &b, 0.95).unwrap().p_value;
        let want = if diffs.iter().all(|d| *d == 0.0) {
            1.0
        } else {
            wilcoxon_enumerated(&diffs)
        };
        wilcoxon_exact &= got == want;
    }

    let adjust_err = adjust_oracle_error();

    let mut endpoints = true;
    for _ in 0..100 {
        let none = rng.random_range(0.5..2.0);
        let silver = rng.random_range(0.01..0.45);
        endpoints &= normalize_score(silver, none, silver).unwrap() == 100.0;
        endpoints &= normalize_score(none, none, silver).unwrap() == 200.0;
    }

    let pass = pava_err <= 1e-9 && detector_err <= 1e-12 && wilcoxon_exact && adjust_err <= 1e-12 && endpoints;
    emit(
        6,
        pass,
        &format!(
            "PAVA {pava_err:.1e}; detectors {detector_err:.1e}; Wilcoxon exact={wilcoxon_exact}; adjust {adjust_err:.1e}; endpoints exact={endpoints}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- 7

fn gradient_rel_error() -> f64 {
    let mut rng = seeded(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (n, p, c) = (8, 5, 3);
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let model = LinearModel {
            weights: Array2::from_shape_fn((c, p), |_| {
                0.5 * {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v
                }
            }),
            bias: Array1::from_shape_fn(c, |_| {
                0.5 * {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    v
                }
            }),
        };
        let l2 = 0.1;
        let (_, g) = objective(&model, x.view(), &y, l2).unwrap();
        let h = 1e-6;
        let f = |m: &LinearModel| objective(m, x.view(), &y, l2).unwrap().0;
        let mut num = Vec::new();
        let mut ana = Vec::new();
        for r in 0..c {
            for j in 0..p {
                let (mut a, mut b) = (model.clone(), model.clone());
                a.weights[[r, j]] += h;
                b.weights[[r, j]] -= h;
                num.push((f(&a) - f(&b)) / (2.0 * h));
                ana.push(g.weights[[r, j]]);
            }
            let (mut a, mut b) = (model.clone(), model.clone());
            a.bias[r] += h;
            b.bias[r] -= h;
            num.push((f(&a) - f(&b)) / (2.0 * h));
            ana.push(g.bias[r]);
        }
        let diff: f64 = num.iter().zip(&ana).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = num
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(ana.iter().map(|v| v * v).sum::<f64>().sqrt());
        worst = worst.max(diff / scale);
    }
    worst
}

#[test]
fn criterion_7_numerics() {
    let grad = gradient_rel_error();

    let mut rng = seeded(17);
    let mut s = Array2::from_shape_fn((50, 6), |_| {
        30.0 * {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        }
    });
    softmax_rows(&mut s);
    let softmax_err = s.rows().into_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);

    let data = Array2::from_shape_fn((500, 2), |_| StandardNormal.sample(&mut rng));
    let rff = fit_rff(&data, 1000, 23).unwrap();
    let z = rff.transform(&data).unwrap();
    let mut kernel_err: f64 = 0.0;
    for _ in 0..100 {
        let (i, j) = (rng.random_range(0..500), rng.random_range(0..500));
        let approx = z.row(i).dot(&z.row(j));
        let dist2: f64 = (0..2).map(|k| (data[[i, k]] - data[[j, k]]).powi(2)).sum();
        kernel_err = kernel_err.max((approx - (-rff.gamma() * dist2).exp()).abs());
    }

    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let one_hot = Array2::from_shape_fn((30, 3), |(i, c)| f64::from(labels[i] == c));
    let ece = classwise_ece(&one_hot, &labels, 10);

    let pass = grad < 1e-5 && softmax_err <= 1e-9 && kernel_err < 0.15 && ece == 0.0;
    emit(
        7,
        pass,
        &format!(
            "gradient rel. err {grad:.1e}; softmax row-sum err {softmax_err:.1e}; RFF kernel err {kernel_err:.3}; one-hot ECE {ece}"
        ),
    );
    assert!(pass);
}
