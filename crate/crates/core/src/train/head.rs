use crate::error::Result;
use crate::label::{Label, TaskKind};
use crate::prob_head::{LogitDistribution, ProbOutput};
use crate::rng::NormalSource;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `d(-ln clamp(p)) / dp`; zero where the clamp is active.
fn neg_log_slope(p: f64) -> f64 {
    if p > PROB_CLAMP && p < 1.0 - PROB_CLAMP {
        -1.0 / p
    } else {
        0.0
    }
}

/// Cross-entropy on the Monte Carlo mean probabilities (multi-class), or
/// summed binary cross-entropy over classes (multi-label).
pub fn loss(out: &ProbOutput, label: &Label, task: TaskKind) -> Result<f64> {
    let k = out.num_classes();
    label.validate(task, k)?;
    let p = &out.mean_probs;
    Ok(match label {
        Label::Class(y) => -clamp(p[*y]).ln(),
        Label::MultiHot(y) => -(0..k)
            .map(|c| {
                let q = clamp(p[c]);
                if y[c] == 1 {
                    q.ln()
                } else {
                    (1.0 - q).ln()
                }
            })
            .sum::<f64>(),
    })
}

/// `dL / d mean_probs[c]`.
fn loss_slopes(mean_probs: &[f64], label: &Label) -> Vec<f64> {
    let k = mean_probs.len();
    match label {
        Label::Class(y) => {
            let mut g = vec![0.0; k];
            g[*y] = neg_log_slope(mean_probs[*y]);
            g
        }
        Label::MultiHot(y) => (0..k)
            .map(|c| {
                if y[c] == 1 {
                    neg_log_slope(mean_probs[c])
                } else {
                    -neg_log_slope(1.0 - mean_probs[c])
                }
            })
            .collect(),
    }
}

/// Gradient of the loss with respect to the logit means and scales.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrad {
    pub d_means: Vec<f64>,
    pub d_scales: Vec<f64>,
}

/// Pathwise gradient through the tempered Monte Carlo head.
///
/// `probs` holds the `S x K` sampled probabilities produced from `draws`;
/// the same draws are read back here. With `z = (f + sigma mu) / tau`,
/// `dz/df = 1/tau` and `dz/dsigma = mu/tau`. Softmax heads couple classes
/// through the sample-row Jacobian `p_y (delta_yc - p_c)`, sigmoid heads use
/// the diagonal `p_c (1 - p_c)`.
pub fn head_backward<N: NormalSource>(
    dist: &LogitDistribution,
    temperature: f64,
    draws: &N,
    probs: &[f64],
    mean_probs: &[f64],
    label: &Label,
    multilabel: bool,
) -> HeadGrad {
    let k = dist.num_classes();
    let samples = probs.len() / k;
    let slopes = loss_slopes(mean_probs, label);
    let inv = 1.0 / (samples as f64 * temperature);
    let mut d_means = vec![0.0; k];
    let mut d_scales = vec![0.0; k];
    let mut dz = vec![0.0; k];
    for (s, row) in probs.chunks(k).enumerate() {
        if multilabel {
            for c in 0..k {
                dz[c] = slopes[c] * row[c] * (1.0 - row[c]);
            }
        } else {
            // sum_y g_y p_y (delta_yc - p_c) = p_c (g_c - sum_y g_y p_y)
            let weighted: f64 = slopes.iter().zip(row).map(|(g, p)| g * p).sum();
            for c in 0..k {
                dz[c] = row[c] * (slopes[c] - weighted);
            }
        }
        for c in 0..k {
            d_means[c] += dz[c];
            d_scales[c] += dz[c] * draws.normal(s, c);
        }
    }
    for c in 0..k {
        d_means[c] *= inv;
        d_scales[c] *= inv;
    }
    HeadGrad { d_means, d_scales }
}

/// Gradient of a deterministic softmax/sigmoid head with respect to its logits.
pub(crate) fn deterministic_backward(probs: &[f64], label: &Label, multilabel: bool) -> Vec<f64> {
    let slopes = loss_slopes(probs, label);
    if multilabel {
        (0..probs.len())
            .map(|c| slopes[c] * probs[c] * (1.0 - probs[c]))
            .collect()
    } else {
        let weighted: f64 = slopes.iter().zip(probs).map(|(g, p)| g * p).sum();
        (0..probs.len())
            .map(|c| probs[c] * (slopes[c] - weighted))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_head::{sample_probs, summarize, Link};
    use crate::rng::NoiseStream;

    fn out(p: &[f64]) -> ProbOutput {
        ProbOutput::deterministic(p.to_vec())
    }

    #[test]
    fn loss_examples() {
        let l = loss(&out(&[1.0 - PROB_CLAMP, PROB_CLAMP]), &Label::Class(0), TaskKind::Multiclass).unwrap();
        assert!(l < 1e-11);
        let l = loss(&out(&[0.5, 0.5]), &Label::Class(1), TaskKind::Multiclass).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let l = loss(&out(&[0.9, 0.2]), &Label::MultiHot(vec![1, 0]), TaskKind::Multilabel).unwrap();
        assert!((l - 0.328_504_066_972_036_2).abs() < 1e-12);
        // Clamped at both ends.
        let l = loss(&out(&[1.0, 0.0]), &Label::Class(1), TaskKind::Multiclass).unwrap();
        assert!((l - 27.631_021_115_928_547).abs() < 1e-9);
    }

    #[test]
    fn loss_rejects_invalid_labels() {
        assert!(loss(&out(&[0.5, 0.5]), &Label::Class(2), TaskKind::Multiclass).is_err());
        assert!(loss(&out(&[0.5, 0.5]), &Label::MultiHot(vec![1]), TaskKind::Multilabel).is_err());
        assert!(loss(&out(&[0.5, 0.5]), &Label::Class(0), TaskKind::Multilabel).is_err());
    }

    #[test]
    fn zero_scale_head_gives_softmax_cross_entropy_gradient() {
        let means = vec![0.4, -1.0, 0.9];
        let dist = LogitDistribution::point(means.clone()).unwrap();
        let st = NoiseStream::new(3);
        let probs = sample_probs(&dist, 1.0, 16, &st, Link::Softmax);
        let summary = summarize(&probs, 3, false);
        let g = head_backward(&dist, 1.0, &st, &probs, &summary.mean_probs, &Label::Class(1), false);
        let p = crate::prob_head::softmax(&means);
        for c in 0..3 {
            let expected = p[c] - f64::from(u8::from(c == 1));
            assert!((g.d_means[c] - expected).abs() < 1e-14);
        }
    }
}
