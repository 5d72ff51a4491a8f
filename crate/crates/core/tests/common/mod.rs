//! Independent reference implementations shared by the integration tests.
//! Written from the metric definitions, deliberately naive (quadratic or
//! enumerative), and sharing no code with the library.
#![allow(dead_code)]

use hetnoise::label::Label;
use hetnoise::rng::NoiseStream;
use hetnoise::train::{batch_loss, grad, HetModel, Sample};

/// 2TP / (2TP + FP + FN) from explicit (predicted, truth) bit pairs; 0 when
/// the denominator vanishes.
pub fn f1_from_pairs(pairs: &[(bool, bool)]) -> f64 {
    let tp = pairs.iter().filter(|&&(p, t)| p && t).count() as f64;
    let fp = pairs.iter().filter(|&&(p, t)| p && !t).count() as f64;
    let fn_ = pairs.iter().filter(|&&(p, t)| !p && t).count() as f64;
    if 2.0 * tp + fp + fn_ == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

/// Binary F1 on class 1, or micro F1 pooled over every (sample, class) pair.
pub fn f1_oracle(pred: &[Label], truth: &[Label], classes: usize, binary: bool) -> f64 {
    let mut pairs = Vec::new();
    for (p, t) in pred.iter().zip(truth) {
        if binary {
            pairs.push((p.indicator(1) == 1, t.indicator(1) == 1));
        } else {
            for c in 0..classes {
                pairs.push((p.indicator(c) == 1, t.indicator(c) == 1));
            }
        }
    }
    f1_from_pairs(&pairs)
}

/// Exhaustive threshold sweep: for every distinct score t (descending),
/// predict positive when score >= t; area = sum of recall increments times
/// the precision at that threshold.
pub fn auprc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let retrieved: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let hits = retrieved.iter().filter(|&&i| labels[i]).count() as f64;
        let recall = hits / positives;
        let precision = hits / retrieved.len() as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// Rank = 1 + #smaller + (#equal others) / 2.
pub fn rank_oracle(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let smaller = values.iter().filter(|&&w| w < v).count() as f64;
            let equal = values.iter().enumerate().filter(|&(j, &w)| j != i && w == v).count() as f64;
            1.0 + smaller + equal / 2.0
        })
        .collect()
}

pub fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (rank_oracle(a), rank_oracle(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub fn median_oracle(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Discard errors by counting, for each sample, how many samples precede it
/// in the discard order (higher uncertainty, or equal and lower index).
pub fn discard_errors_oracle(uncertainty: &[f64], losses: &[f64], fractions: &[f64]) -> Vec<f64> {
    let n = uncertainty.len();
    let position: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| uncertainty[j] > uncertainty[i] || (uncertainty[j] == uncertainty[i] && j < i))
                .count()
        })
        .collect();
    fractions
        .iter()
        .map(|&q| {
            // Smallest integer m with m >= q * n (up to rounding noise).
            let mut m = 0;
            while (m as f64) < q * n as f64 - 1e-9 {
                m += 1;
            }
            let kept: Vec<f64> = (0..n).filter(|&i| position[i] >= m).map(|i| losses[i]).collect();
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect()
}

pub fn mf_oracle(errors: &[f64]) -> f64 {
    let steps = (errors.len() - 1) as f64;
    let mut hits = 0.0;
    for i in 0..errors.len() - 1 {
        if errors[i] >= errors[i + 1] {
            hits += 1.0;
        }
    }
    hits / steps
}

pub fn di_oracle(errors: &[f64]) -> f64 {
    (errors[0] - errors[errors.len() - 1]) / (errors.len() - 1) as f64
}

/// Worst relative error of the analytic gradient against central finite
/// differences of the same loss (same Monte Carlo draws), with the
/// denominator floored at `floor`.
pub fn gradient_check(model: &HetModel, batch: &[Sample<'_>], stream: &NoiseStream, h: f64, floor: f64) -> (f64, String) {
    let (_, g) = grad(model, batch, stream).expect("analytic gradient");
    let analytic = g.flatten();
    let base = model.parameters();
    let mut worst = (0.0, String::new());
    for i in 0..base.len() {
        let mut m = model.clone();
        let mut p = base.clone();
        p[i] = base[i] + h;
        m.set_parameters(&p).unwrap();
        let up = batch_loss(&m, batch, stream).unwrap();
        p[i] = base[i] - h;
        m.set_parameters(&p).unwrap();
        let down = batch_loss(&m, batch, stream).unwrap();
        let numeric = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > worst.0 {
            worst = (rel, format!("{} analytic {} numeric {}", model.parameter_path(i), analytic[i], numeric));
        }
    }
    worst
}
