use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::TaskKind;

use super::density::{density_summary, CorrectnessSplit, DensityScope, GroupDensity};
use super::discard::{discard_test, DiscardCurve};
use super::metrics::{auprc, f1_score, F1Mode};
use super::{PredictionSet, Target};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub f1: f64,
    pub f1_mode: F1Mode,
    /// Absent when the target labels contain no positives.
    pub auprc: Option<f64>,
    pub accuracy: f64,
    pub mean_loss: f64,
}

impl Metrics {
    /// Binary tasks score class 1; everything else is micro-averaged over
    /// (sample, class) pairs, with AUPRC on the flattened one-vs-rest scores.
    pub fn compute(preds: &PredictionSet) -> Result<Self> {
        let targets = preds.target_labels();
        let binary = preds.task == TaskKind::Multiclass && preds.num_classes == 2;
        let f1_mode = if binary { F1Mode::BinaryPositive } else { F1Mode::Micro };
        let f1 = f1_score(&preds.predicted, targets, f1_mode)?;
        let (scores, labels): (Vec<f64>, Vec<bool>) = if binary {
            preds
                .probs
                .iter()
                .zip(targets)
                .map(|(p, t)| (p[1], t.indicator(1) == 1))
                .unzip()
        } else {
            preds
                .probs
                .iter()
                .zip(targets)
                .flat_map(|(p, t)| (0..preds.num_classes).map(move |c| (p[c], t.indicator(c) == 1)))
                .unzip()
        };
        let auprc = match auprc(&scores, &labels) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            f1,
            f1_mode,
            auprc,
            accuracy: preds.accuracy(),
            mean_loss: preds.mean_loss(),
        })
    }
}

/// Metrics, discard curve and uncertainty densities of one evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub against: Target,
    pub metrics: Metrics,
    pub discard: DiscardCurve,
    /// Scope (`all`, `per_class`) to group name to correct/incorrect
    /// densities.
    pub densities: BTreeMap<String, BTreeMap<String, CorrectnessSplit>>,
}

impl EvalReport {
    pub fn build(preds: &PredictionSet, fractions: &[f64]) -> Result<Self> {
        let metrics = Metrics::compute(preds)?;
        let discard = discard_test(preds, fractions)?;
        let mut densities = BTreeMap::new();
        densities.insert("all".to_string(), density_summary(preds, DensityScope::All)?.groups);
        densities.insert("per_class".to_string(), density_summary(preds, DensityScope::PerClass)?.groups);
        Ok(Self {
            format_version: REPORT_FORMAT_VERSION,
            against: preds.target,
            metrics,
            discard,
            densities,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    fn groups(&self) -> impl Iterator<Item = (&str, &str, &str, &GroupDensity)> {
        self.densities.iter().flat_map(|(scope, groups)| {
            groups.iter().flat_map(move |(name, split)| {
                [("correct", &split.correct), ("incorrect", &split.incorrect)]
                    .map(|(outcome, g)| (scope.as_str(), name.as_str(), outcome, g))
            })
        })
    }

    /// Long-format raw uncertainties: `scope,group,outcome,uncertainty`.
    pub fn uncertainty_csv(&self) -> String {
        let mut out = String::from("scope,group,outcome,uncertainty\n");
        for (scope, name, outcome, g) in self.groups() {
            for v in &g.values {
                let _ = writeln!(out, "{scope},{name},{outcome},{v}");
            }
        }
        out
    }

    /// Histogram bins: `scope,group,outcome,lower,upper,count`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("scope,group,outcome,lower,upper,count\n");
        for (scope, name, outcome, g) in self.groups() {
            let h = &g.histogram;
            for (i, c) in h.counts.iter().enumerate() {
                let _ = writeln!(out, "{scope},{name},{outcome},{},{},{c}", h.edges[i], h.edges[i + 1]);
            }
        }
        out
    }
}
