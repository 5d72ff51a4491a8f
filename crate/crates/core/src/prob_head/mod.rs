//! Probabilistic output layer.
//!
//! A Gaussian is placed over the logits, `u_c = f_c + sigma_c * mu_c` with
//! `mu_c ~ N(0, 1)` independent across classes, and class probabilities are
//! estimated by averaging a temperature-scaled softmax (or per-class
//! sigmoid, for multi-label tasks) over `S` Monte Carlo draws. The
//! per-class population variance of the sampled probabilities is the
//! aleatoric uncertainty.

mod argmax;

pub use argmax::gaussian_argmax_prob;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Antithetic, NoiseStream, NormalSource};

/// Below this many `S * K` entries the sampling loop stays on one thread.
const PARALLEL_THRESHOLD: usize = 1 << 16;

/// Gaussian over the logits of one input: per-class mean and scale.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitDistribution {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl LogitDistribution {
    pub fn new(means: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid_input("logit distribution needs at least one class"));
        }
        if means.len() != scales.len() {
            return Err(Error::DimensionMismatch {
                what: "logit scales",
                expected: means.len(),
                got: scales.len(),
            });
        }
        if means.iter().chain(&scales).any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("non-finite logit mean or scale"));
        }
        if scales.iter().any(|&s| s < 0.0) {
            return Err(Error::invalid_input("negative logit scale"));
        }
        Ok(Self { means, scales })
    }

    /// Zero-noise distribution centred on `means`.
    pub fn point(means: Vec<f64>) -> Result<Self> {
        let scales = vec![0.0; means.len()];
        Self::new(means, scales)
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Applies the same class permutation to means and scales.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            means: perm.iter().map(|&p| self.means[p]).collect(),
            scales: perm.iter().map(|&p| self.scales[p]).collect(),
        }
    }
}

/// Temperature, Monte Carlo sample count and root seed of a stochastic
/// forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub temperature: f64,
    pub num_samples: usize,
    pub seed: u64,
    /// Pair every even draw with its negation. Off by default.
    #[serde(default)]
    pub antithetic: bool,
}

impl McConfig {
    pub const DEFAULT_SAMPLES: usize = 1000;

    pub fn new(temperature: f64, num_samples: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            temperature,
            num_samples,
            seed,
            antithetic: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid_config(format!(
                "temperature must be positive and finite, got {}",
                self.temperature
            )));
        }
        if self.num_samples == 0 {
            return Err(Error::invalid_config("num_samples must be at least 1"));
        }
        Ok(())
    }

    /// Root stream derived from `seed`.
    pub fn stream(&self) -> NoiseStream {
        NoiseStream::new(self.seed)
    }
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            num_samples: Self::DEFAULT_SAMPLES,
            seed: 0,
            antithetic: false,
        }
    }
}

/// Monte Carlo estimate of the class probabilities of one input.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbOutput {
    pub mean_probs: Vec<f64>,
    pub aleatoric: Vec<f64>,
    /// `S` rows of `K` sampled probabilities, kept only on request.
    pub per_sample_probs: Option<Vec<Vec<f64>>>,
}

impl ProbOutput {
    pub fn num_classes(&self) -> usize {
        self.mean_probs.len()
    }

    /// Output of a noiseless head: the given probabilities with zero
    /// uncertainty.
    pub fn deterministic(probs: Vec<f64>) -> Self {
        let k = probs.len();
        Self {
            mean_probs: probs,
            aleatoric: vec![0.0; k],
            per_sample_probs: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    Softmax,
    Sigmoid,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Max-subtracted softmax, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for z in row.iter_mut() {
        *z = (*z - max).exp();
        total += *z;
    }
    for z in row.iter_mut() {
        *z /= total;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut row = logits.to_vec();
    softmax_in_place(&mut row);
    row
}

/// Neumaier-compensated sum in index order.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Fills an `S x K` row-major buffer with sampled probabilities.
pub(crate) fn sample_probs<N: NormalSource>(
    dist: &LogitDistribution,
    temperature: f64,
    samples: usize,
    draws: &N,
    link: Link,
) -> Vec<f64> {
    let k = dist.num_classes();
    let (means, scales) = (dist.means(), dist.scales());
    let fill = |s: usize, row: &mut [f64]| {
        for c in 0..k {
            row[c] = (means[c] + scales[c] * draws.normal(s, c)) / temperature;
        }
        match link {
            Link::Softmax => softmax_in_place(row),
            Link::Sigmoid => row.iter_mut().for_each(|z| *z = sigmoid(*z)),
        }
    };
    let mut probs = vec![0.0; samples * k];
    if samples * k >= PARALLEL_THRESHOLD {
        probs
            .par_chunks_mut(k)
            .enumerate()
            .for_each(|(s, row)| fill(s, row));
    } else {
        probs.chunks_mut(k).enumerate().for_each(|(s, row)| fill(s, row));
    }
    probs
}

/// Column means and population variances of an `S x K` buffer.
pub(crate) fn summarize(probs: &[f64], k: usize, keep: bool) -> ProbOutput {
    let samples = probs.len() / k;
    let n = samples as f64;
    let column = |c: usize| probs.iter().skip(c).step_by(k).copied();
    let mean_probs: Vec<f64> = (0..k).map(|c| compensated_sum(column(c)) / n).collect();
    let aleatoric = (0..k)
        .map(|c| {
            let m = mean_probs[c];
            compensated_sum(column(c).map(|p| (p - m) * (p - m))) / n
        })
        .collect();
    let per_sample_probs = keep.then(|| probs.chunks(k).map(<[f64]>::to_vec).collect());
    ProbOutput {
        mean_probs,
        aleatoric,
        per_sample_probs,
    }
}

fn run(
    dist: &LogitDistribution,
    cfg: &McConfig,
    stream: &NoiseStream,
    link: Link,
    keep: bool,
) -> Result<ProbOutput> {
    cfg.validate()?;
    let probs = if cfg.antithetic {
        sample_probs(dist, cfg.temperature, cfg.num_samples, &Antithetic(stream), link)
    } else {
        sample_probs(dist, cfg.temperature, cfg.num_samples, stream, link)
    };
    Ok(summarize(&probs, dist.num_classes(), keep))
}

/// Tempered Monte Carlo softmax. Draws are taken from `stream`; `cfg.seed`
/// is only used by callers that build the stream via [`McConfig::stream`].
pub fn tempered_mc_softmax(
    dist: &LogitDistribution,
    cfg: &McConfig,
    stream: &NoiseStream,
) -> Result<ProbOutput> {
    run(dist, cfg, stream, Link::Softmax, false)
}

/// As [`tempered_mc_softmax`], keeping the `S x K` sampled probabilities.
pub fn tempered_mc_softmax_retained(
    dist: &LogitDistribution,
    cfg: &McConfig,
    stream: &NoiseStream,
) -> Result<ProbOutput> {
    run(dist, cfg, stream, Link::Softmax, true)
}

/// Per-class tempered Monte Carlo sigmoid for multi-label heads.
pub fn tempered_mc_sigmoid(
    dist: &LogitDistribution,
    cfg: &McConfig,
    stream: &NoiseStream,
) -> Result<ProbOutput> {
    run(dist, cfg, stream, Link::Sigmoid, false)
}

pub fn tempered_mc_sigmoid_retained(
    dist: &LogitDistribution,
    cfg: &McConfig,
    stream: &NoiseStream,
) -> Result<ProbOutput> {
    run(dist, cfg, stream, Link::Sigmoid, true)
}

/// Evaluates the estimator on explicit draws; the sample count is the
/// number of rows of `draws`.
pub fn tempered_mc_with_draws<N: NormalSource>(
    dist: &LogitDistribution,
    temperature: f64,
    samples: usize,
    draws: &N,
    link: Link,
    keep: bool,
) -> Result<ProbOutput> {
    McConfig::new(temperature, samples, 0)?;
    let probs = sample_probs(dist, temperature, samples, draws, link);
    Ok(summarize(&probs, dist.num_classes(), keep))
}

/// Uncertainty score attached to a prediction of `predicted_class`.
pub fn aleatoric_summary(out: &ProbOutput, predicted_class: usize) -> Result<f64> {
    out.aleatoric
        .get(predicted_class)
        .copied()
        .ok_or(Error::IndexOutOfRange {
            index: predicted_class,
            len: out.aleatoric.len(),
        })
}
