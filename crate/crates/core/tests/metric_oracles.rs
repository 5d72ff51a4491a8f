mod common;

use hetnoise::eval::{
    auprc, discard_curve, f1_score, median, spearman, split_by_correctness, F1Mode,
};
use hetnoise::label::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

/// Values on a coarse grid so ties are common.
fn tied(rng: &mut ChaCha8Rng, n: usize, levels: u32) -> Vec<f64> {
    (0..n).map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels)).collect()
}

#[test]
fn f1_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(1..=100);
        let k = rng.random_range(2..=5);
        let binary = k == 2 && rng.random_bool(0.5);
        let multilabel = !binary && rng.random_bool(0.5);
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..n {
            let (p, t) = if multilabel {
                let mh = |rng: &mut ChaCha8Rng| Label::MultiHot((0..k).map(|_| rng.random_range(0..2u8)).collect());
                (mh(&mut rng), mh(&mut rng))
            } else {
                let c = |rng: &mut ChaCha8Rng| Label::Class(rng.random_range(0..if binary { 2 } else { k }));
                (c(&mut rng), c(&mut rng))
            };
            pred.push(p);
            truth.push(t);
        }
        let mode = if binary { F1Mode::BinaryPositive } else { F1Mode::Micro };
        let got = f1_score(&pred, &truth, mode).unwrap();
        let want = common::f1_oracle(&pred, &truth, k, binary);
        assert!((got - want).abs() <= TOL, "{got} vs {want}");
    }
}

#[test]
fn micro_f1_on_single_label_is_accuracy() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let n = rng.random_range(1..=60);
        let p: Vec<Label> = (0..n).map(|_| Label::Class(rng.random_range(0..4))).collect();
        let t: Vec<Label> = (0..n).map(|_| Label::Class(rng.random_range(0..4))).collect();
        let acc = p.iter().zip(&t).filter(|(a, b)| a == b).count() as f64 / n as f64;
        assert!((f1_score(&p, &t, F1Mode::Micro).unwrap() - acc).abs() <= TOL);
    }
}

#[test]
fn auprc_matches_threshold_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(1..=100);
        let scores = if rng.random_bool(0.5) { tied(&mut rng, n, 7) } else { (0..n).map(|_| rng.random()).collect() };
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        if !labels.contains(&true) {
            assert!(auprc(&scores, &labels).is_err());
            continue;
        }
        let got = auprc(&scores, &labels).unwrap();
        let want = common::auprc_oracle(&scores, &labels);
        assert!((got - want).abs() <= TOL, "{got} vs {want}");
        done += 1;
    }
}

#[test]
fn auprc_ignores_monotone_transforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let n = rng.random_range(2..=80);
        let scores = tied(&mut rng, n, 10);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        assert!((auprc(&scores, &labels).unwrap() - auprc(&warped, &labels).unwrap()).abs() <= TOL);
    }
}

#[test]
fn discard_curve_matches_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..100 {
        let n = rng.random_range(10..=100);
        let u = if rng.random_bool(0.5) { tied(&mut rng, n, 5) } else { (0..n).map(|_| rng.random()).collect() };
        let losses: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let mut fractions: Vec<f64> = (0..rng.random_range(2..=10)).map(|_| rng.random_range(0.0..0.9)).collect();
        fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fractions.dedup();
        if fractions.len() < 2 {
            continue;
        }
        let curve = discard_curve(&u, &losses, &fractions).unwrap();
        let want = common::discard_errors_oracle(&u, &losses, &fractions);
        for (a, b) in curve.errors.iter().zip(&want) {
            assert!((a - b).abs() <= TOL, "{a} vs {b}");
        }
        assert!((curve.mf - common::mf_oracle(&want)).abs() <= TOL);
        assert!((curve.di - common::di_oracle(&want)).abs() <= TOL);
    }
}

#[test]
fn zero_fraction_is_the_mean_loss() {
    let losses = [0.3, 1.2, 0.0, 2.5];
    let curve = discard_curve(&[0.1, 0.4, 0.4, 0.2], &losses, &[0.0, 0.5]).unwrap();
    assert!((curve.errors[0] - 1.0).abs() <= TOL);
}

#[test]
fn medians_match_sorting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..100 {
        let n = rng.random_range(1..=100);
        let values: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let correct: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        assert_eq!(median(&values), common::median_oracle(&values));
        let split = split_by_correctness(&values, &correct);
        let ok: Vec<f64> = (0..n).filter(|&i| correct[i]).map(|i| values[i]).collect();
        let bad: Vec<f64> = (0..n).filter(|&i| !correct[i]).map(|i| values[i]).collect();
        assert_eq!(split.correct.median, common::median_oracle(&ok));
        assert_eq!(split.incorrect.median, common::median_oracle(&bad));
        assert_eq!(split.correct.count + split.incorrect.count, n);
    }
}

#[test]
fn spearman_matches_rank_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(2..=100);
        let a = tied(&mut rng, n, 6);
        let b: Vec<f64> = if rng.random_bool(0.5) { tied(&mut rng, n, 4) } else { (0..n).map(|_| rng.random()).collect() };
        let want = common::spearman_oracle(&a, &b);
        if !want.is_finite() {
            assert!(spearman(&a, &b).is_err());
            continue;
        }
        let got = spearman(&a, &b).unwrap();
        assert!((got - want).abs() <= TOL, "{got} vs {want}");
        done += 1;
    }
}
