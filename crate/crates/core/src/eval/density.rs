use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::TaskKind;

use super::PredictionSet;

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityScope {
    PerClass,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Uniform bins over `[0, upper]`; the top edge is inclusive.
    fn build(values: &[f64], upper: f64) -> Self {
        let width = upper / HISTOGRAM_BINS as f64;
        let edges = (0..=HISTOGRAM_BINS).map(|i| i as f64 * width).collect();
        let mut counts = vec![0; HISTOGRAM_BINS];
        for &v in values {
            let bin = ((v / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDensity {
    pub count: usize,
    /// `None` for an empty group.
    pub median: Option<f64>,
    pub histogram: Histogram,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessSplit {
    pub correct: GroupDensity,
    pub incorrect: GroupDensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub scope: DensityScope,
    pub groups: BTreeMap<String, CorrectnessSplit>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Partitions uncertainties by correctness. Both histograms share bins over
/// `[0, max]` (`[0, 1]` when every value is zero).
pub fn split_by_correctness(values: &[f64], correct: &[bool]) -> CorrectnessSplit {
    let max = values.iter().copied().fold(0.0, f64::max);
    let upper = if max > 0.0 { max } else { 1.0 };
    let group = |want: bool| {
        let vals: Vec<f64> = values
            .iter()
            .zip(correct)
            .filter(|(_, &c)| c == want)
            .map(|(&v, _)| v)
            .collect();
        GroupDensity {
            count: vals.len(),
            median: median(&vals),
            histogram: Histogram::build(&vals, upper),
            values: vals,
        }
    };
    CorrectnessSplit {
        correct: group(true),
        incorrect: group(false),
    }
}

/// One multi-label (sample, class) cell: class, truth value, uncertainty,
/// whether the prediction matches.
type Entry = (usize, u8, f64, bool);

/// Uncertainty distributions of correct and incorrect predictions.
///
/// Multi-class: `all` pools every sample; `per_class` groups samples by
/// their target class (`class_<c>`). Multi-label tasks work on
/// (sample, class) entries with their per-class uncertainty: `all`,
/// `negative` and `positive` pool classes, `per_class` gives
/// `class_<c>`, `class_<c>_negative` and `class_<c>_positive`.
pub fn density_summary(preds: &PredictionSet, scope: DensityScope) -> Result<DensitySummary> {
    if preds.is_empty() {
        return Err(Error::invalid_input("density summary of an empty prediction set"));
    }
    let targets = preds.target_labels();
    let mut groups = BTreeMap::new();
    match preds.task {
        TaskKind::Multiclass => {
            let correct = preds.correct();
            match scope {
                DensityScope::All => {
                    groups.insert("all".to_string(), split_by_correctness(&preds.uncertainty, &correct));
                }
                DensityScope::PerClass => {
                    for c in 0..preds.num_classes {
                        let idx: Vec<usize> = (0..preds.len()).filter(|&i| targets[i].class() == Some(c)).collect();
                        let vals: Vec<f64> = idx.iter().map(|&i| preds.uncertainty[i]).collect();
                        let ok: Vec<bool> = idx.iter().map(|&i| correct[i]).collect();
                        groups.insert(format!("class_{c}"), split_by_correctness(&vals, &ok));
                    }
                }
            }
        }
        TaskKind::Multilabel => {
            let entries: Vec<Entry> = (0..preds.len())
                .flat_map(|i| {
                    (0..preds.num_classes).map(move |c| {
                        let y = targets[i].indicator(c);
                        let p = preds.predicted[i].indicator(c);
                        (c, y, preds.class_uncertainty[i][c], p == y)
                    })
                })
                .collect();
            let mut add = |name: String, keep: &dyn Fn(&Entry) -> bool| {
                let sel: Vec<_> = entries.iter().filter(|e| keep(e)).collect();
                let vals: Vec<f64> = sel.iter().map(|e| e.2).collect();
                let ok: Vec<bool> = sel.iter().map(|e| e.3).collect();
                groups.insert(name, split_by_correctness(&vals, &ok));
            };
            match scope {
                DensityScope::All => {
                    add("all".into(), &|_| true);
                    add("negative".into(), &|e| e.1 == 0);
                    add("positive".into(), &|e| e.1 == 1);
                }
                DensityScope::PerClass => {
                    for c in 0..preds.num_classes {
                        add(format!("class_{c}"), &|e| e.0 == c);
                        add(format!("class_{c}_negative"), &|e| e.0 == c && e.1 == 0);
                        add(format!("class_{c}_positive"), &|e| e.0 == c && e.1 == 1);
                    }
                }
            }
        }
    }
    Ok(DensitySummary { scope, groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_example() {
        let s = split_by_correctness(&[0.1, 0.2, 0.3], &[true, true, false]);
        assert!((s.correct.median.unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(s.incorrect.median, Some(0.3));
        assert_eq!(s.correct.count + s.incorrect.count, 3);
    }

    #[test]
    fn empty_group_is_flagged() {
        let s = split_by_correctness(&[0.1, 0.4], &[true, true]);
        assert_eq!(s.incorrect.count, 0);
        assert_eq!(s.incorrect.median, None);
        assert_eq!(s.incorrect.histogram.counts.iter().sum::<usize>(), 0);
    }

    #[test]
    fn histogram_covers_the_range() {
        let vals = [0.0, 0.5, 1.0, 2.0];
        let s = split_by_correctness(&vals, &[true; 4]);
        let h = &s.correct.histogram;
        assert_eq!(h.edges.len(), HISTOGRAM_BINS + 1);
        assert_eq!(h.edges[HISTOGRAM_BINS], 2.0);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[HISTOGRAM_BINS - 1], 1);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        let zeros = split_by_correctness(&[0.0, 0.0], &[true, false]);
        assert_eq!(zeros.correct.histogram.counts[0], 1);
    }
}
