use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{PredictionSet, Target};
use crate::label::{argmax, Label, TaskKind};
use crate::noisegen::NoisyDataset;
use crate::prob_head::{aleatoric_summary, McConfig};

use super::model::{forward, HetModel};

/// Predicts every sample with `cfg` (temperature, sample count, seed).
///
/// Multi-class predictions take the argmax and attach the aleatoric
/// variance of that class; multi-label predictions threshold each class at
/// 0.5 and attach the mean per-class variance. Losses are computed against
/// the noisy labels; see [`PredictionSet::retarget`].
pub fn predict_dataset(model: &HetModel, data: &NoisyDataset, cfg: &McConfig) -> Result<PredictionSet> {
    cfg.validate()?;
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "dataset feature width",
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    let model = model.clone().with_mc_config(*cfg);
    let root = cfg.stream();
    let outs = data
        .features()
        .par_iter()
        .enumerate()
        .map(|(i, x)| forward(&model, x, &root.derive(i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let k = model.num_classes();
    let mut probs = Vec::with_capacity(outs.len());
    let mut predicted = Vec::with_capacity(outs.len());
    let mut uncertainty = Vec::with_capacity(outs.len());
    let mut class_uncertainty = Vec::with_capacity(outs.len());
    for out in outs {
        match model.task() {
            TaskKind::Multiclass => {
                let c = argmax(&out.mean_probs);
                uncertainty.push(aleatoric_summary(&out, c)?);
                predicted.push(Label::Class(c));
            }
            TaskKind::Multilabel => {
                uncertainty.push(out.aleatoric.iter().sum::<f64>() / k as f64);
                predicted.push(Label::MultiHot(
                    out.mean_probs.iter().map(|&p| u8::from(p >= 0.5)).collect(),
                ));
            }
        }
        probs.push(out.mean_probs);
        class_uncertainty.push(out.aleatoric);
    }
    PredictionSet::new(
        model.task(),
        k,
        probs,
        predicted,
        uncertainty,
        class_uncertainty,
        data.noisy_labels().to_vec(),
        data.clean_labels().map(<[Label]>::to_vec),
        Target::Noisy,
    )
}
