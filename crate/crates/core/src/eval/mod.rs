//! Predictive metrics and uncertainty-reliability evaluation.

mod density;
mod discard;
mod metrics;
mod report;

pub use density::{
    density_summary, median, split_by_correctness, CorrectnessSplit, DensityScope, DensitySummary,
    GroupDensity, Histogram, HISTOGRAM_BINS,
};
pub use discard::{
    default_fractions, discard_curve, discard_improvement, discard_test, monotonicity_fraction,
    DiscardCurve,
};
pub use metrics::{auprc, f1_score, sigma_oracle_correlation, spearman, F1Mode};
pub use report::{EvalReport, Metrics, REPORT_FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, TaskKind};
use crate::prob_head::ProbOutput;
use crate::train::loss;

/// Which labels losses, metrics and correctness are measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Noisy,
    Clean,
}

/// Per-sample predictions, uncertainties, labels and losses.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    pub task: TaskKind,
    pub num_classes: usize,
    pub probs: Vec<Vec<f64>>,
    pub predicted: Vec<Label>,
    /// Scalar uncertainty ranked by the discard test.
    pub uncertainty: Vec<f64>,
    /// Per-class aleatoric variances.
    pub class_uncertainty: Vec<Vec<f64>>,
    pub noisy_labels: Vec<Label>,
    pub clean_labels: Option<Vec<Label>>,
    /// Loss of each sample against `target` labels.
    pub losses: Vec<f64>,
    pub target: Target,
}

impl PredictionSet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        task: TaskKind,
        num_classes: usize,
        probs: Vec<Vec<f64>>,
        predicted: Vec<Label>,
        uncertainty: Vec<f64>,
        class_uncertainty: Vec<Vec<f64>>,
        noisy_labels: Vec<Label>,
        clean_labels: Option<Vec<Label>>,
        target: Target,
    ) -> Result<Self> {
        let n = probs.len();
        let same = [predicted.len(), uncertainty.len(), class_uncertainty.len(), noisy_labels.len()]
            .iter()
            .all(|&l| l == n)
            && clean_labels.as_ref().is_none_or(|c| c.len() == n);
        if !same {
            return Err(Error::invalid_input("prediction arrays differ in length"));
        }
        if uncertainty.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err(Error::invalid_input("uncertainties must be finite and non-negative"));
        }
        let mut set = Self {
            task,
            num_classes,
            probs,
            predicted,
            uncertainty,
            class_uncertainty,
            noisy_labels,
            clean_labels,
            losses: Vec::new(),
            target,
        };
        set.losses = set.compute_losses(target)?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn labels_for(&self, target: Target) -> Result<&[Label]> {
        match target {
            Target::Noisy => Ok(&self.noisy_labels),
            Target::Clean => self
                .clean_labels
                .as_deref()
                .ok_or_else(|| Error::invalid_input("clean labels are not available for this data")),
        }
    }

    pub fn target_labels(&self) -> &[Label] {
        self.labels_for(self.target).expect("target labels checked at construction")
    }

    fn compute_losses(&self, target: Target) -> Result<Vec<f64>> {
        let labels = self.labels_for(target)?;
        self.probs
            .iter()
            .zip(labels)
            .map(|(p, l)| loss(&ProbOutput::deterministic(p.clone()), l, self.task))
            .collect()
    }

    /// Same predictions measured against other labels.
    pub fn retarget(&self, target: Target) -> Result<Self> {
        let losses = self.compute_losses(target)?;
        Ok(Self {
            losses,
            target,
            ..self.clone()
        })
    }

    /// Whether each prediction equals its target label exactly.
    pub fn correct(&self) -> Vec<bool> {
        self.predicted
            .iter()
            .zip(self.target_labels())
            .map(|(p, t)| p == t)
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let c = self.correct();
        c.iter().filter(|&&b| b).count() as f64 / c.len() as f64
    }

    pub fn mean_loss(&self) -> f64 {
        self.losses.iter().sum::<f64>() / self.losses.len() as f64
    }
}
