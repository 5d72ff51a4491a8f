use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noisegen::NoisyDataset;
use crate::rng::NoiseStream;

use super::grad::{grad, Gradients, Sample};
use super::model::HetModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub train_mc_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 20,
            optimizer: OptimizerKind::default(),
            seed: 0,
            train_mc_samples: crate::prob_head::McConfig::DEFAULT_SAMPLES,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero learning rate is accepted and leaves the parameters untouched.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid_config("learning_rate must be finite and non-negative"));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.train_mc_samples == 0 {
            return Err(Error::invalid_config(
                "batch_size, epochs and train_mc_samples must be positive",
            ));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            let unit = |b: f64| (0.0..1.0).contains(&b);
            if !(unit(beta1) && unit(beta2) && eps > 0.0) {
                return Err(Error::invalid_config("adam needs betas in [0, 1) and eps > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{},{}", r.epoch, r.train_loss);
        }
        out
    }
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, n: usize) -> Self {
        Self {
            kind,
            lr,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn apply(&mut self, model: &mut HetModel, grads: &Gradients) {
        self.step += 1;
        let mut idx = 0;
        for (layer, g) in model.layers_mut().iter_mut().zip(&grads.layers) {
            let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
            for (p, &d) in params.zip(g.weights.iter().chain(&g.biases)) {
                match self.kind {
                    OptimizerKind::Sgd => *p -= self.lr * d,
                    OptimizerKind::Adam { beta1, beta2, eps } => {
                        let m = &mut self.m[idx];
                        let v = &mut self.v[idx];
                        *m = beta1 * *m + (1.0 - beta1) * d;
                        *v = beta2 * *v + (1.0 - beta2) * d * d;
                        let m_hat = *m / (1.0 - beta1.powi(self.step));
                        let v_hat = *v / (1.0 - beta2.powi(self.step));
                        *p -= self.lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
                idx += 1;
            }
        }
    }
}

/// Stream domain of minibatch shuffles, apart from the per-step draw streams.
const SHUFFLE_DOMAIN: u64 = u64::MAX;

/// Minibatch training on the dataset's noisy labels.
///
/// Training draws come from `(seed, step, sample index)` and shuffles from
/// `(seed, epoch)`, so a run is fully determined by its inputs. The model's
/// temperature is used as is; its sample count is replaced by
/// `cfg.train_mc_samples` during training and restored afterwards.
pub fn fit(model: HetModel, data: &NoisyDataset, cfg: &TrainConfig) -> Result<(HetModel, TrainingLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid_input("empty training set"));
    }
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "dataset feature width",
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    if data.num_classes() != model.num_classes() || data.task() != model.task() {
        return Err(Error::invalid_input("dataset labels do not match the model head"));
    }

    let eval_mc = *model.mc_config();
    let mut train_mc = eval_mc;
    train_mc.num_samples = cfg.train_mc_samples;
    let mut model = model.with_mc_config(train_mc);

    let root = NoiseStream::new(cfg.seed);
    let shuffles = root.derive(SHUFFLE_DOMAIN);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.num_parameters());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainingLog::default();
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut shuffles.rng(epoch as u64));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sample> = chunk
                .iter()
                .map(|&i| Sample {
                    id: i as u64,
                    features: &data.features()[i],
                    label: &data.noisy_labels()[i],
                })
                .collect();
            let (value, g) = grad(&model, &batch, &root.derive(step))?;
            opt.apply(&mut model, &g);
            if let Some(i) = model.parameters().iter().position(|p| !p.is_finite()) {
                return Err(Error::TrainingFailure {
                    path: model.parameter_path(i),
                    reason: format!("non-finite parameter after step {step}"),
                });
            }
            total += value * chunk.len() as f64;
            step += 1;
        }
        log.epochs.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: total / data.len() as f64,
        });
    }
    Ok((model.with_mc_config(eval_mc), log))
}
