use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::TaskKind;
use crate::prob_head::{
    sigmoid, softmax, tempered_mc_sigmoid, tempered_mc_softmax, LogitDistribution, McConfig,
    ProbOutput,
};
use crate::rng::NoiseStream;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub(crate) fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    Multiclass,
    Multilabel,
    Deterministic,
}

impl HeadMode {
    pub fn is_probabilistic(self) -> bool {
        self != HeadMode::Deterministic
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleTransform {
    SoftplusPlusEps,
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Affine layer, weights row-major with shape `(outputs, inputs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.inputs)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

/// Architecture and head configuration for a fresh model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub activation: Activation,
    pub head_mode: HeadMode,
    /// Only consulted by the deterministic head; probabilistic heads imply it.
    pub task: TaskKind,
    pub sigma_min: f64,
    pub mc_config: McConfig,
}

impl ModelSpec {
    pub const DEFAULT_SIGMA_MIN: f64 = 1e-6;

    pub fn new(input_dim: usize, hidden: Vec<usize>, classes: usize, head_mode: HeadMode) -> Self {
        let task = match head_mode {
            HeadMode::Multilabel => TaskKind::Multilabel,
            _ => TaskKind::Multiclass,
        };
        Self {
            input_dim,
            hidden,
            classes,
            activation: Activation::Tanh,
            head_mode,
            task,
            sigma_min: Self::DEFAULT_SIGMA_MIN,
            mc_config: McConfig::default(),
        }
    }

    fn layer_dims(&self) -> Vec<usize> {
        let out = if self.head_mode.is_probabilistic() {
            2 * self.classes
        } else {
            self.classes
        };
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden);
        dims.push(out);
        dims
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HetModel {
    layer_dims: Vec<usize>,
    activation: Activation,
    head_mode: HeadMode,
    task: TaskKind,
    scale_transform: ScaleTransform,
    sigma_min: f64,
    mc_config: McConfig,
    pub(crate) layers: Vec<Dense>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// `inputs[l]` is the input of layer `l`; the last entry is the raw output.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pub pre: Vec<Vec<f64>>,
}

impl HetModel {
    /// All-zero parameters.
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        validate_spec(spec)?;
        let dims = spec.layer_dims();
        let layers = dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            layer_dims: dims,
            activation: spec.activation,
            head_mode: spec.head_mode,
            task: spec.task,
            scale_transform: ScaleTransform::SoftplusPlusEps,
            sigma_min: spec.sigma_min,
            mc_config: spec.mc_config,
            layers,
        })
    }

    /// Uniform Glorot (tanh) or He (relu) initialization, zero biases.
    pub fn new(spec: &ModelSpec, init_seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = NoiseStream::new(init_seed).rng(0);
        for layer in &mut model.layers {
            let (fan_in, fan_out) = (layer.inputs as f64, layer.outputs as f64);
            let limit = match spec.activation {
                Activation::Tanh => (6.0 / (fan_in + fan_out)).sqrt(),
                Activation::Relu => (6.0 / fan_in).sqrt(),
            };
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(model)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn num_classes(&self) -> usize {
        let out = *self.layer_dims.last().unwrap();
        if self.head_mode.is_probabilistic() {
            out / 2
        } else {
            out
        }
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn head_mode(&self) -> HeadMode {
        self.head_mode
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn mc_config(&self) -> &McConfig {
        &self.mc_config
    }

    pub fn with_mc_config(mut self, cfg: McConfig) -> Self {
        self.mc_config = cfg;
        self
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_parameters() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.num_parameters(),
                got: values.len(),
            });
        }
        let mut it = values.iter();
        for layer in &mut self.layers {
            for p in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *p = *it.next().unwrap();
            }
        }
        Ok(())
    }

    /// Human-readable location of flat parameter `index`.
    pub fn parameter_path(&self, mut index: usize) -> String {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.weights.len() {
                return format!("layers[{l}].weights[{index}]");
            }
            index -= layer.weights.len();
            if index < layer.biases.len() {
                return format!("layers[{l}].biases[{index}]");
            }
            index -= layer.biases.len();
        }
        format!("parameter[{index}]")
    }

    pub(crate) fn forward_trace(&self, features: &[f64]) -> Result<Trace> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "features",
                expected: self.input_dim(),
                got: features.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(last);
        inputs.push(features.to_vec());
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&inputs[l]);
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("activations of layer {l}")));
            }
            if l < last {
                inputs.push(z.iter().map(|&v| self.activation.apply(v)).collect());
                pre.push(z);
            } else {
                inputs.push(z);
            }
        }
        Ok(Trace { inputs, pre })
    }

    /// Raw network outputs (means then raw scales for probabilistic heads).
    pub fn raw_outputs(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(features)?.inputs.pop().unwrap())
    }

    /// Gaussian over the logits; scales are `softplus(raw) + sigma_min`.
    pub fn logit_distribution(&self, raw: &[f64]) -> Result<LogitDistribution> {
        let k = self.num_classes();
        if !self.head_mode.is_probabilistic() {
            return LogitDistribution::point(raw.to_vec());
        }
        let scales = raw[k..].iter().map(|&r| softplus(r) + self.sigma_min).collect();
        LogitDistribution::new(raw[..k].to_vec(), scales)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format_version: MODEL_FORMAT_VERSION,
            head_mode: self.head_mode,
            task: self.task,
            layer_dims: self.layer_dims.clone(),
            activation: self.activation,
            scale_transform: self.scale_transform,
            sigma_min: self.sigma_min,
            mc_config: self.mc_config,
            weights: self
                .layers
                .iter()
                .map(|l| LayerDoc {
                    weights: l.weights.clone(),
                    biases: l.biases.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&doc)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format_version {}",
                doc.format_version
            )));
        }
        let dims = &doc.layer_dims;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Format("layer_dims must hold at least two positive widths".into()));
        }
        if doc.weights.len() != dims.len() - 1 {
            return Err(Error::Format("one weight block per layer expected".into()));
        }
        let mut layers = Vec::with_capacity(doc.weights.len());
        for (w, block) in dims.windows(2).zip(doc.weights) {
            if block.weights.len() != w[0] * w[1] || block.biases.len() != w[1] {
                return Err(Error::Format("weight block does not match layer_dims".into()));
            }
            if block.weights.iter().chain(&block.biases).any(|v| !v.is_finite()) {
                return Err(Error::Format("non-finite parameter".into()));
            }
            layers.push(Dense {
                inputs: w[0],
                outputs: w[1],
                weights: block.weights,
                biases: block.biases,
            });
        }
        let out = *dims.last().unwrap();
        if doc.head_mode.is_probabilistic() && !out.is_multiple_of(2) {
            return Err(Error::Format("probabilistic head needs an even output width".into()));
        }
        doc.mc_config.validate()?;
        Ok(Self {
            layer_dims: doc.layer_dims,
            activation: doc.activation,
            head_mode: doc.head_mode,
            task: doc.task,
            scale_transform: doc.scale_transform,
            sigma_min: doc.sigma_min,
            mc_config: doc.mc_config,
            layers,
        })
    }
}

fn validate_spec(spec: &ModelSpec) -> Result<()> {
    if spec.input_dim == 0 || spec.classes == 0 || spec.hidden.contains(&0) {
        return Err(Error::invalid_config("layer widths must be positive"));
    }
    if spec.task == TaskKind::Multiclass && spec.classes < 2 {
        return Err(Error::invalid_config("multi-class heads need at least two classes"));
    }
    match (spec.head_mode, spec.task) {
        (HeadMode::Multiclass, TaskKind::Multilabel) | (HeadMode::Multilabel, TaskKind::Multiclass) => {
            return Err(Error::invalid_config("head_mode and task disagree"));
        }
        _ => {}
    }
    if !(spec.sigma_min > 0.0 && spec.sigma_min.is_finite()) {
        return Err(Error::invalid_config("sigma_min must be positive"));
    }
    spec.mc_config.validate()
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    head_mode: HeadMode,
    task: TaskKind,
    layer_dims: Vec<usize>,
    activation: Activation,
    scale_transform: ScaleTransform,
    sigma_min: f64,
    mc_config: McConfig,
    weights: Vec<LayerDoc>,
}

/// One stochastic forward pass using the model's own [`McConfig`].
pub fn forward(model: &HetModel, features: &[f64], stream: &NoiseStream) -> Result<ProbOutput> {
    let raw = model.raw_outputs(features)?;
    match (model.head_mode, model.task) {
        (HeadMode::Deterministic, TaskKind::Multiclass) => Ok(ProbOutput::deterministic(softmax(&raw))),
        (HeadMode::Deterministic, TaskKind::Multilabel) => {
            Ok(ProbOutput::deterministic(raw.iter().map(|&z| sigmoid(z)).collect()))
        }
        (HeadMode::Multiclass, _) => {
            tempered_mc_softmax(&model.logit_distribution(&raw)?, &model.mc_config, stream)
        }
        (HeadMode::Multilabel, _) => {
            tempered_mc_sigmoid(&model.logit_distribution(&raw)?, &model.mc_config, stream)
        }
    }
}
