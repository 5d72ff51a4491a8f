//! Synthetic noisy-label benchmarks with a known noise oracle.
//!
//! Clean tasks are Gaussian blob mixtures whose Bayes discriminants are
//! affine in the features. Noisy labels come from the latent utility
//! process `u_c = f_c(x) + sigma_c(x) z_c`, `z_c ~ N(0, 1)`: the argmax
//! of `u` for multi-class tasks, or `1[u_c > 0]` per class for multi-label
//! tasks. The per-sample `sigma(x)` is recorded as the oracle.

mod io;

pub use io::{read_jsonl, write_jsonl, DATASET_FORMAT_VERSION};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, TaskKind};
use crate::rng::{NoiseStream, NormalSource};

const FEATURE_DOMAIN: u64 = 1;
const CORRUPT_DOMAIN: u64 = 2;
const SPLIT_DOMAIN: u64 = 3;
const CENTER_DOMAIN: u64 = 4;

/// Noise source families, mapped onto synthetic generator modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Constant scale everywhere (unreliable labelling procedure).
    UniformFlip,
    /// Large scale only where the two leading logits are within a margin.
    RegionAmbiguity,
    /// Scale on a single class (inherently stochastic events).
    StochasticEvent,
    /// Scale decaying linearly with distance from the decision boundary.
    BoundaryMisalignment,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::UniformFlip,
        NoiseKind::RegionAmbiguity,
        NoiseKind::StochasticEvent,
        NoiseKind::BoundaryMisalignment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::UniformFlip => "uniform_flip",
            NoiseKind::RegionAmbiguity => "region_ambiguity",
            NoiseKind::StochasticEvent => "stochastic_event",
            NoiseKind::BoundaryMisalignment => "boundary_misalignment",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid_config(format!("unknown profile kind `{s}`")))
    }
}

/// Parametric family mapping the true logits of an input to per-class
/// noise scales, as multiples of the profile's `base_scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ScaleField {
    Constant,
    MarginGate { margin: f64 },
    SingleClass { class: usize },
    BoundaryRamp { width: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub kind: NoiseKind,
    pub base_scale: f64,
    pub scale_field: ScaleField,
}

impl NoiseProfile {
    pub fn uniform_flip(base_scale: f64) -> Self {
        Self {
            kind: NoiseKind::UniformFlip,
            base_scale,
            scale_field: ScaleField::Constant,
        }
    }

    pub fn region_ambiguity(base_scale: f64, margin: f64) -> Self {
        Self {
            kind: NoiseKind::RegionAmbiguity,
            base_scale,
            scale_field: ScaleField::MarginGate { margin },
        }
    }

    pub fn stochastic_event(base_scale: f64, class: usize) -> Self {
        Self {
            kind: NoiseKind::StochasticEvent,
            base_scale,
            scale_field: ScaleField::SingleClass { class },
        }
    }

    pub fn boundary_misalignment(base_scale: f64, width: f64) -> Self {
        Self {
            kind: NoiseKind::BoundaryMisalignment,
            base_scale,
            scale_field: ScaleField::BoundaryRamp { width },
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(self.base_scale >= 0.0 && self.base_scale.is_finite()) {
            return Err(Error::invalid_config("base_scale must be finite and non-negative"));
        }
        let consistent = match (self.kind, self.scale_field) {
            (NoiseKind::UniformFlip, ScaleField::Constant) => true,
            (NoiseKind::RegionAmbiguity, ScaleField::MarginGate { margin }) => {
                margin >= 0.0 && margin.is_finite()
            }
            (NoiseKind::StochasticEvent, ScaleField::SingleClass { class }) => class < classes,
            (NoiseKind::BoundaryMisalignment, ScaleField::BoundaryRamp { width }) => {
                width > 0.0 && width.is_finite()
            }
            _ => false,
        };
        if !consistent {
            return Err(Error::invalid_config(format!(
                "scale field {:?} is invalid for profile kind {}",
                self.scale_field, self.kind
            )));
        }
        Ok(())
    }

    /// Per-class true noise scales at an input with the given true logits.
    ///
    /// Multi-class tasks measure boundary distance by the gap between the
    /// two largest logits; multi-label tasks by `|f_c|` per class.
    pub fn scales(&self, logits: &[f64], task: TaskKind) -> Vec<f64> {
        let k = logits.len();
        let base = self.base_scale;
        let margins: Vec<f64> = match task {
            TaskKind::Multiclass => vec![top_two_gap(logits); k],
            TaskKind::Multilabel => logits.iter().map(|f| f.abs()).collect(),
        };
        match self.scale_field {
            ScaleField::Constant => vec![base; k],
            ScaleField::MarginGate { margin } => margins
                .iter()
                .map(|&g| if g < margin { base } else { 0.0 })
                .collect(),
            ScaleField::SingleClass { class } => {
                (0..k).map(|c| if c == class { base } else { 0.0 }).collect()
            }
            ScaleField::BoundaryRamp { width } => margins
                .iter()
                .map(|&g| base * (1.0 - g / width).max(0.0))
                .collect(),
        }
    }
}

fn top_two_gap(logits: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in logits {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    if second == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        first - second
    }
}

/// Affine true logit function `f(x) = W x + b`, `W` stored as `K` rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineLogits {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl AffineLogits {
    pub fn num_classes(&self) -> usize {
        self.biases.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    /// Clean label implied by the logits.
    pub fn label(&self, x: &[f64], task: TaskKind) -> Label {
        let f = self.eval(x);
        match task {
            TaskKind::Multiclass => Label::Class(crate::label::argmax(&f)),
            TaskKind::Multilabel => Label::MultiHot(f.iter().map(|&v| u8::from(v > 0.0)).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobConfig {
    /// Distance between neighbouring blob centres.
    pub separation: f64,
    pub blob_std: f64,
    /// Mixture weights; uniform when absent.
    pub class_weights: Option<Vec<f64>>,
    pub task: TaskKind,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            separation: 4.0,
            blob_std: 1.0,
            class_weights: None,
            task: TaskKind::Multiclass,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CleanTask {
    pub task: TaskKind,
    pub features: Vec<Vec<f64>>,
    pub blob_ids: Vec<usize>,
    pub logits: AffineLogits,
    pub clean_labels: Vec<Label>,
}

pub fn make_clean_task(n: usize, d: usize, k: usize, seed: u64) -> Result<CleanTask> {
    make_clean_task_with(n, d, k, seed, &BlobConfig::default())
}

/// Samples `n` points from a mixture of `k` isotropic Gaussian blobs in
/// `d` dimensions. The true logits are the Bayes discriminants of the
/// mixture; multi-label tasks centre them across classes.
pub fn make_clean_task_with(n: usize, d: usize, k: usize, seed: u64, cfg: &BlobConfig) -> Result<CleanTask> {
    if n == 0 || d == 0 || k == 0 {
        return Err(Error::invalid_config("n, d and k must be at least 1"));
    }
    if cfg.task == TaskKind::Multiclass && k < 2 {
        return Err(Error::invalid_config("multi-class tasks need k >= 2"));
    }
    if !(cfg.blob_std > 0.0 && cfg.blob_std.is_finite()) {
        return Err(Error::invalid_config("degenerate blob covariance: blob_std must be positive"));
    }
    if !(cfg.separation >= 0.0 && cfg.separation.is_finite()) {
        return Err(Error::invalid_config("separation must be finite and non-negative"));
    }
    let weights = match &cfg.class_weights {
        Some(w) if w.len() != k || w.iter().any(|&v| !(v > 0.0 && v.is_finite())) => {
            return Err(Error::invalid_config("class_weights need k positive entries"));
        }
        Some(w) => w.clone(),
        None => vec![1.0; k],
    };
    let total: f64 = weights.iter().sum();
    let priors: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let root = NoiseStream::new(seed);
    let centers = blob_centers(d, k, cfg.separation, &root.derive(CENTER_DOMAIN));
    let var = cfg.blob_std * cfg.blob_std;
    let mut weights_rows: Vec<Vec<f64>> = centers.iter().map(|m| m.iter().map(|v| v / var).collect()).collect();
    let mut biases: Vec<f64> = centers
        .iter()
        .zip(&priors)
        .map(|(m, p)| -m.iter().map(|v| v * v).sum::<f64>() / (2.0 * var) + p.ln())
        .collect();
    if cfg.task == TaskKind::Multilabel {
        let mean_b = biases.iter().sum::<f64>() / k as f64;
        let mean_w: Vec<f64> = (0..d).map(|j| weights_rows.iter().map(|r| r[j]).sum::<f64>() / k as f64).collect();
        for r in &mut weights_rows {
            r.iter_mut().zip(&mean_w).for_each(|(w, m)| *w -= m);
        }
        biases.iter_mut().for_each(|b| *b -= mean_b);
    }
    let logits = AffineLogits {
        weights: weights_rows,
        biases,
    };

    let feature_stream = root.derive(FEATURE_DOMAIN);
    let mut features: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut blob_ids = Vec::with_capacity(n);
    for i in 0..n {
        let st = feature_stream.derive(i as u64);
        let u = st.uniform(u64::MAX, 0);
        let mut acc = 0.0;
        let mut blob = k - 1;
        for (c, p) in priors.iter().enumerate() {
            acc += p;
            if u <= acc {
                blob = c;
                break;
            }
        }
        features.push((0..d).map(|j| centers[blob][j] + cfg.blob_std * st.normal(0, j)).collect());
        blob_ids.push(blob);
    }
    let clean_labels = features.iter().map(|x| logits.label(x, cfg.task)).collect();
    Ok(CleanTask {
        task: cfg.task,
        features,
        blob_ids,
        logits,
        clean_labels,
    })
}

/// Axis-aligned centres at pairwise distance `separation` when `k <= d`,
/// evenly spaced on a line when `d == 1`, random directions otherwise.
fn blob_centers(d: usize, k: usize, separation: f64, stream: &NoiseStream) -> Vec<Vec<f64>> {
    let radius = separation / std::f64::consts::SQRT_2;
    (0..k)
        .map(|c| {
            let mut m = vec![0.0; d];
            if d == 1 {
                m[0] = separation * (c as f64 - (k as f64 - 1.0) / 2.0);
            } else if c < d {
                m[c] = radius;
            } else {
                let dir: Vec<f64> = (0..d).map(|j| stream.normal(c, j)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                m.iter_mut().zip(dir).for_each(|(v, u)| *v = radius * u / norm);
            }
            m
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    All,
    Train,
    Val,
    Test,
}

/// Features with clean labels, noisy labels and the per-sample true noise
/// scales that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyDataset {
    task: TaskKind,
    num_classes: usize,
    features: Vec<Vec<f64>>,
    clean_labels: Option<Vec<Label>>,
    noisy_labels: Vec<Label>,
    true_scales: Vec<Vec<f64>>,
    split_tag: SplitTag,
    seed: u64,
    profile: Option<NoiseProfile>,
}

impl NoisyDataset {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        task: TaskKind,
        num_classes: usize,
        features: Vec<Vec<f64>>,
        clean_labels: Option<Vec<Label>>,
        noisy_labels: Vec<Label>,
        true_scales: Vec<Vec<f64>>,
        split_tag: SplitTag,
        seed: u64,
        profile: Option<NoiseProfile>,
    ) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::invalid_input("dataset needs at least one sample"));
        }
        let d = features[0].len();
        if d == 0 || features.iter().any(|x| x.len() != d) {
            return Err(Error::invalid_input("feature rows must share a positive width"));
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("non-finite feature value"));
        }
        let lengths_ok = noisy_labels.len() == n
            && true_scales.len() == n
            && clean_labels.as_ref().is_none_or(|c| c.len() == n);
        if !lengths_ok {
            return Err(Error::invalid_input("labels and scales must have one entry per sample"));
        }
        for l in noisy_labels.iter().chain(clean_labels.iter().flatten()) {
            l.validate(task, num_classes)?;
        }
        if true_scales
            .iter()
            .any(|s| s.len() != num_classes || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)))
        {
            return Err(Error::invalid_input("true scales must be K finite non-negative values"));
        }
        if let Some(clean) = &clean_labels {
            let disagree = (0..n).any(|i| true_scales[i].iter().all(|&s| s == 0.0) && clean[i] != noisy_labels[i]);
            if disagree {
                return Err(Error::invalid_input("noisy label differs from clean label at a zero-noise sample"));
            }
        }
        if let Some(p) = &profile {
            p.validate(num_classes)?;
        }
        Ok(Self {
            task,
            num_classes,
            features,
            clean_labels,
            noisy_labels,
            true_scales,
            split_tag,
            seed,
            profile,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn clean_labels(&self) -> Option<&[Label]> {
        self.clean_labels.as_deref()
    }

    pub fn noisy_labels(&self) -> &[Label] {
        &self.noisy_labels
    }

    pub fn true_scales(&self) -> &[Vec<f64>] {
        &self.true_scales
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn profile(&self) -> Option<&NoiseProfile> {
        self.profile.as_ref()
    }

    /// Fraction of samples whose noisy label differs from the clean one.
    pub fn disagreement_rate(&self) -> Option<f64> {
        let clean = self.clean_labels.as_ref()?;
        let flips = clean.iter().zip(&self.noisy_labels).filter(|(a, b)| a != b).count();
        Some(flips as f64 / self.len() as f64)
    }

    fn subset(&self, indices: &[usize], tag: SplitTag) -> Self {
        let pick = |v: &Vec<Vec<f64>>| indices.iter().map(|&i| v[i].clone()).collect();
        Self {
            task: self.task,
            num_classes: self.num_classes,
            features: pick(&self.features),
            clean_labels: self.clean_labels.as_ref().map(|c| indices.iter().map(|&i| c[i].clone()).collect()),
            noisy_labels: indices.iter().map(|&i| self.noisy_labels[i].clone()).collect(),
            true_scales: pick(&self.true_scales),
            split_tag: tag,
            seed: self.seed,
            profile: self.profile,
        }
    }
}

/// Applies the latent-variable label process to a clean task.
pub fn corrupt(
    features: &[Vec<f64>],
    clean_labels: &[Label],
    f_true: &AffineLogits,
    profile: &NoiseProfile,
    seed: u64,
) -> Result<NoisyDataset> {
    let k = f_true.num_classes();
    profile.validate(k)?;
    if features.len() != clean_labels.len() {
        return Err(Error::invalid_input("features and clean labels differ in length"));
    }
    let task = match clean_labels.first() {
        Some(Label::MultiHot(_)) => TaskKind::Multilabel,
        _ => TaskKind::Multiclass,
    };
    if f_true.weights.iter().any(|w| features.first().is_some_and(|x| w.len() != x.len())) {
        return Err(Error::invalid_input("true logit weights do not match the feature width"));
    }
    let stream = NoiseStream::new(seed).derive(CORRUPT_DOMAIN);
    let mut noisy = Vec::with_capacity(features.len());
    let mut scales = Vec::with_capacity(features.len());
    for (i, (x, clean)) in features.iter().zip(clean_labels).enumerate() {
        let f = f_true.eval(x);
        let sigma = profile.scales(&f, task);
        let label = if sigma.iter().all(|&s| s == 0.0) {
            clean.clone()
        } else {
            let st = stream.derive(i as u64);
            let u: Vec<f64> = (0..k).map(|c| f[c] + sigma[c] * st.normal(0, c)).collect();
            match task {
                TaskKind::Multiclass => Label::Class(crate::label::argmax(&u)),
                TaskKind::Multilabel => Label::MultiHot(u.iter().map(|&v| u8::from(v > 0.0)).collect()),
            }
        };
        noisy.push(label);
        scales.push(sigma);
    }
    NoisyDataset::new(
        task,
        k,
        features.to_vec(),
        Some(clean_labels.to_vec()),
        noisy,
        scales,
        SplitTag::All,
        seed,
        Some(*profile),
    )
}

/// Blob task plus label corruption, both driven by `seed`.
pub fn generate(
    n: usize,
    d: usize,
    k: usize,
    profile: &NoiseProfile,
    seed: u64,
    blobs: &BlobConfig,
) -> Result<NoisyDataset> {
    let task = make_clean_task_with(n, d, k, seed, blobs)?;
    corrupt(&task.features, &task.clean_labels, &task.logits, profile, seed)
}

/// Split sizes by largest-remainder rounding of `fractions * n`.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::invalid_config("split fractions must be positive"));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid_config("split fractions must sum to 1"));
    }
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = sizes.iter().sum();
    for &i in order.iter().take(n - assigned) {
        sizes[i] += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::invalid_config(format!("split of {n} samples leaves an empty part: {sizes:?}")));
    }
    Ok(sizes)
}

/// Shuffled, disjoint and exhaustive train/validation/test split.
pub fn split(dataset: &NoisyDataset, fractions: [f64; 3], seed: u64) -> Result<[NoisyDataset; 3]> {
    use rand::seq::SliceRandom;
    let sizes = split_sizes(dataset.len(), fractions)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut NoiseStream::new(seed).rng(SPLIT_DOMAIN));
    let (train, rest) = order.split_at(sizes[0]);
    let (val, test) = rest.split_at(sizes[1]);
    Ok([
        dataset.subset(train, SplitTag::Train),
        dataset.subset(val, SplitTag::Val),
        dataset.subset(test, SplitTag::Test),
    ])
}
