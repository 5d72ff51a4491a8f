//! Exact probability that each class attains the largest latent utility
//! when `u_c ~ N(f_c, sigma_c^2)` independently.

use crate::error::{Error, Result};
use crate::special::{integrate, norm_cdf, norm_pdf};

use super::LogitDistribution;

const QUAD_HALF_WIDTH: f64 = 12.0;
const QUAD_TOL: f64 = 1e-13;

/// `P(u_k < t)` for one class; a step function when the scale is zero.
fn below(t: f64, mean: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        norm_cdf((t - mean) / scale)
    } else if t > mean {
        1.0
    } else if t < mean {
        0.0
    } else {
        0.5
    }
}

/// Probability that class `c` is the argmax. Closed form for two classes,
/// one-dimensional quadrature otherwise. Classes with zero scale that tie
/// at the maximum split their mass uniformly.
pub fn gaussian_argmax_prob(dist: &LogitDistribution) -> Result<Vec<f64>> {
    let (means, scales) = (dist.means(), dist.scales());
    if means.iter().chain(scales).any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("non-finite logit mean or scale"));
    }
    let k = means.len();
    if k == 1 {
        return Ok(vec![1.0]);
    }
    if scales.iter().all(|&s| s == 0.0) {
        let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let winners = means.iter().filter(|&&m| m == max).count() as f64;
        return Ok(means
            .iter()
            .map(|&m| if m == max { 1.0 / winners } else { 0.0 })
            .collect());
    }
    if k == 2 {
        let spread = scales[0].hypot(scales[1]);
        let p0 = norm_cdf((means[0] - means[1]) / spread);
        return Ok(vec![p0, norm_cdf((means[1] - means[0]) / spread)]);
    }

    let probs = (0..k)
        .map(|c| {
            if scales[c] == 0.0 {
                // u_c is the constant f_c.
                let fc = means[c];
                if (0..k).any(|j| scales[j] == 0.0 && means[j] > fc) {
                    return 0.0;
                }
                let ties = (0..k).filter(|&j| scales[j] == 0.0 && means[j] == fc).count();
                let random: f64 = (0..k)
                    .filter(|&j| scales[j] > 0.0)
                    .map(|j| norm_cdf((fc - means[j]) / scales[j]))
                    .product();
                return random / ties as f64;
            }
            // Substitute t = f_c + sigma_c x so the weight is the standard density.
            let integrand = |x: f64| {
                let t = means[c] + scales[c] * x;
                let others: f64 = (0..k)
                    .filter(|&j| j != c)
                    .map(|j| below(t, means[j], scales[j]))
                    .product();
                norm_pdf(x) * others
            };
            integrate(integrand, -QUAD_HALF_WIDTH, QUAD_HALF_WIDTH, QUAD_TOL)
        })
        .collect();
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dist(m: &[f64], s: &[f64]) -> LogitDistribution {
        LogitDistribution::new(m.to_vec(), s.to_vec()).unwrap()
    }

    /// Brute-force argmax frequencies from an independent generator.
    fn simulate(m: &[f64], s: &[f64], draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0usize; m.len()];
        let mut u = vec![0.0; m.len()];
        for _ in 0..draws {
            for c in 0..m.len() {
                let z: f64 = StandardNormal.sample(&mut rng);
                u[c] = m[c] + s[c] * z;
            }
            let best = (0..m.len()).fold(0, |b, c| if u[c] > u[b] { c } else { b });
            counts[best] += 1;
        }
        counts.iter().map(|&n| n as f64 / draws as f64).collect()
    }

    #[test]
    fn symmetric_cases() {
        assert_eq!(gaussian_argmax_prob(&dist(&[0.0, 0.0], &[1.0, 1.0])).unwrap(), vec![0.5, 0.5]);
        let p = gaussian_argmax_prob(&dist(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0])).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_class_matches_table_and_simulation() {
        let p = gaussian_argmax_prob(&dist(&[1.0, 0.0], &[1.0, 1.0])).unwrap();
        assert!((p[0] - 0.760_249_938_906_889).abs() < 1e-12);
        assert!((p[1] - 0.239_750_061_093_111).abs() < 1e-12);
        let sim = simulate(&[1.0, 0.0], &[1.0, 1.0], 10_000_000, 42);
        assert!((sim[0] - p[0]).abs() < 6e-4, "{sim:?}");
    }

    #[test]
    fn quadrature_matches_closed_form_for_two_classes() {
        // Route the K=2 instance through the K>2 quadrature by adding a
        // class that can never win.
        let closed = gaussian_argmax_prob(&dist(&[0.7, -0.4], &[0.5, 1.3])).unwrap();
        let quad = gaussian_argmax_prob(&dist(&[0.7, -0.4, -1e6], &[0.5, 1.3, 0.0])).unwrap();
        assert!((closed[0] - quad[0]).abs() < 1e-11);
        assert!((closed[1] - quad[1]).abs() < 1e-11);
        assert_eq!(quad[2], 0.0);
    }

    #[test]
    fn three_class_matches_simulation() {
        let m = [0.5, 0.0, -0.3];
        let s = [1.0, 2.0, 0.5];
        let p = gaussian_argmax_prob(&dist(&m, &s)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let sim = simulate(&m, &s, 2_000_000, 3);
        for c in 0..3 {
            assert!((sim[c] - p[c]).abs() < 1.5e-3, "{p:?} vs {sim:?}");
        }
    }

    #[test]
    fn degenerate_scales() {
        assert_eq!(
            gaussian_argmax_prob(&dist(&[1.0, 3.0, 3.0], &[0.0, 0.0, 0.0])).unwrap(),
            vec![0.0, 0.5, 0.5]
        );
        // One noisy class against two tied constants.
        let p = gaussian_argmax_prob(&dist(&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0])).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        assert!((p[2] - 0.5).abs() < 1e-9, "{p:?}");
        let p = gaussian_argmax_prob(&dist(&[2.0, 0.0], &[0.0, 1.0])).unwrap();
        assert!((p[0] - norm_cdf(2.0)).abs() < 1e-15);
    }
}
