use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::{Label, TaskKind};
use crate::prob_head::{sample_probs, sigmoid, softmax, summarize, Link, ProbOutput};
use crate::rng::{Antithetic, NoiseStream};

use super::head::{deterministic_backward, head_backward, loss};
use super::model::{HeadMode, HetModel};

/// One training example. `id` keys its Monte Carlo draws, so a sample keeps
/// the same draws wherever it sits in a batch.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub id: u64,
    pub features: &'a [f64],
    pub label: &'a Label,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Parameter-shaped gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    fn zeros_like(model: &HetModel) -> Self {
        Self {
            layers: model
                .layers()
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    /// Flattened in the same order as [`HetModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.biases.iter_mut().zip(&b.biases).for_each(|(x, y)| *x += y);
        }
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|x| *x *= factor);
        }
    }
}

fn link(model: &HetModel) -> Link {
    match model.task() {
        TaskKind::Multiclass => Link::Softmax,
        TaskKind::Multilabel => Link::Sigmoid,
    }
}

/// Loss of one example and, on request, its parameter gradient.
fn example_pass(
    model: &HetModel,
    sample: &Sample<'_>,
    stream: &NoiseStream,
    want_grad: bool,
) -> Result<(f64, Option<Gradients>)> {
    let k = model.num_classes();
    sample.label.validate(model.task(), k)?;
    let trace = model.forward_trace(sample.features)?;
    let raw = trace.inputs.last().unwrap();
    let multilabel = model.task() == TaskKind::Multilabel;

    let (value, d_raw) = if model.head_mode() == HeadMode::Deterministic {
        let probs = if multilabel {
            raw.iter().map(|&z| sigmoid(z)).collect()
        } else {
            softmax(raw)
        };
        let value = loss(&ProbOutput::deterministic(probs.clone()), sample.label, model.task())?;
        let d = want_grad.then(|| deterministic_backward(&probs, sample.label, multilabel));
        (value, d)
    } else {
        let dist = model.logit_distribution(raw)?;
        let cfg = model.mc_config();
        let draws = stream.derive(sample.id);
        let (tau, s) = (cfg.temperature, cfg.num_samples);
        let probs = if cfg.antithetic {
            sample_probs(&dist, tau, s, &Antithetic(&draws), link(model))
        } else {
            sample_probs(&dist, tau, s, &draws, link(model))
        };
        let out = summarize(&probs, k, false);
        let value = loss(&out, sample.label, model.task())?;
        let d = want_grad.then(|| {
            let hg = if cfg.antithetic {
                head_backward(&dist, tau, &Antithetic(&draws), &probs, &out.mean_probs, sample.label, multilabel)
            } else {
                head_backward(&dist, tau, &draws, &probs, &out.mean_probs, sample.label, multilabel)
            };
            let mut d = hg.d_means;
            // scale = softplus(r) + sigma_min, d scale / d r = sigmoid(r)
            d.extend((0..k).map(|c| hg.d_scales[c] * sigmoid(raw[k + c])));
            d
        });
        (value, d)
    };

    let Some(mut delta) = d_raw else {
        return Ok((value, None));
    };
    let mut grads = Gradients::zeros_like(model);
    let act = model.activation();
    for l in (0..model.layers().len()).rev() {
        let layer = &model.layers()[l];
        let input = &trace.inputs[l];
        let g = &mut grads.layers[l];
        for (o, &d) in delta.iter().enumerate() {
            g.biases[o] = d;
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            row.iter_mut().zip(input).for_each(|(w, x)| *w = d * x);
        }
        if l > 0 {
            let pre = &trace.pre[l - 1];
            delta = (0..layer.inputs)
                .map(|i| {
                    let back: f64 = (0..layer.outputs)
                        .map(|o| layer.weights[o * layer.inputs + i] * delta[o])
                        .sum();
                    back * act.derivative(pre[i], input[i])
                })
                .collect();
        }
    }
    Ok((value, Some(grads)))
}

fn check_batch(batch: &[Sample<'_>]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid_input("empty batch"));
    }
    Ok(())
}

/// Mean loss over the batch, with draws keyed by `(stream, sample id)`.
pub fn batch_loss(model: &HetModel, batch: &[Sample<'_>], stream: &NoiseStream) -> Result<f64> {
    check_batch(batch)?;
    let values = batch
        .par_iter()
        .map(|s| example_pass(model, s, stream, false).map(|(v, _)| v))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / batch.len() as f64)
}

/// Mean batch loss and its reverse-mode gradient. The Monte Carlo draws of
/// the forward pass are reused in the backward pass, so the gradient is the
/// exact derivative of the returned loss.
pub fn grad(model: &HetModel, batch: &[Sample<'_>], stream: &NoiseStream) -> Result<(f64, Gradients)> {
    check_batch(batch)?;
    let parts = batch
        .par_iter()
        .map(|s| example_pass(model, s, stream, true))
        .collect::<Result<Vec<_>>>()?;
    let mut total = Gradients::zeros_like(model);
    let mut value = 0.0;
    for (v, g) in &parts {
        value += v;
        total.add_assign(g.as_ref().unwrap());
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    value /= n;
    if !value.is_finite() {
        return Err(Error::TrainingFailure {
            path: "loss".into(),
            reason: format!("non-finite batch loss {value}"),
        });
    }
    if let Some(i) = total.flatten().iter().position(|g| !g.is_finite()) {
        return Err(Error::TrainingFailure {
            path: model.parameter_path(i),
            reason: "non-finite gradient".into(),
        });
    }
    Ok((value, total))
}
