use crate::error::{Error, Result};
use crate::label::Label;
use crate::noisegen::NoisyDataset;

use super::PredictionSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    /// F1 of class 1 in a binary task.
    BinaryPositive,
    /// F1 from TP/FP/FN pooled over every (sample, class) pair.
    Micro,
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

pub fn f1_score(pred: &[Label], truth: &[Label], mode: F1Mode) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::invalid_input("f1 of an empty prediction set"));
    }
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            what: "f1 labels",
            expected: truth.len(),
            got: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, t) in pred.iter().zip(truth) {
        match (mode, p, t) {
            (F1Mode::BinaryPositive, Label::Class(p), Label::Class(t)) => {
                if *p > 1 || *t > 1 {
                    return Err(Error::invalid_input("binary F1 needs labels in {0, 1}"));
                }
                match (*p == 1, *t == 1) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            (F1Mode::Micro, Label::Class(p), Label::Class(t)) => {
                if p == t {
                    tp += 1;
                } else {
                    fp += 1;
                    fn_ += 1;
                }
            }
            (F1Mode::Micro, Label::MultiHot(p), Label::MultiHot(t)) if p.len() == t.len() => {
                for (a, b) in p.iter().zip(t) {
                    match (*a == 1, *b == 1) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        (false, false) => {}
                    }
                }
            }
            _ => return Err(Error::invalid_input(format!("labels {p:?} and {t:?} do not fit {mode:?} F1"))),
        }
    }
    Ok(f1_from_counts(tp, fp, fn_))
}

/// Step-wise area under the precision-recall curve. Samples are visited by
/// descending score; a run of equal scores is one threshold step.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "auprc labels",
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid_input("non-finite score"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one positive label".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen, mut area, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += usize::from(labels[order[i]]);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        let precision = tp as f64 / seen as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Ranks starting at 1, ties sharing their average rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "spearman inputs",
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::UndefinedMetric("correlation needs at least two pairs".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("non-finite correlation input"));
    }
    pearson(&average_ranks(a), &average_ranks(b))
        .ok_or_else(|| Error::UndefinedMetric("correlation of a constant vector".into()))
}

/// Rank correlation between predicted uncertainty and the largest true
/// noise scale of each sample.
pub fn sigma_oracle_correlation(preds: &PredictionSet, dataset: &NoisyDataset) -> Result<f64> {
    if preds.len() != dataset.len() {
        return Err(Error::DimensionMismatch {
            what: "predictions vs dataset",
            expected: dataset.len(),
            got: preds.len(),
        });
    }
    let truth: Vec<f64> = dataset
        .true_scales()
        .iter()
        .map(|s| s.iter().copied().fold(0.0, f64::max))
        .collect();
    spearman(&preds.uncertainty, &truth)
}
