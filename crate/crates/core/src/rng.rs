//! Counter-based random streams.
//!
//! Every draw is a pure function of `(stream key, sample index, class index)`,
//! so results do not depend on iteration order or on how work is split
//! across threads. Keys are mixed with the SplitMix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A source of standard-normal draws indexed by `(sample, class)`.
pub trait NormalSource: Sync {
    fn normal(&self, sample: usize, class: usize) -> f64;
}

/// Keyed counter-based stream. Cheap to copy and to split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NoiseStream {
    key: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self {
            key: mix64(seed.wrapping_add(GOLDEN)),
        }
    }

    /// Child stream for an independent sub-computation (a dataset row, a
    /// training step, ...).
    pub fn derive(&self, id: u64) -> Self {
        Self {
            key: mix64(mix64(self.key ^ 0x5851_F42D_4C95_7F2D).wrapping_add(id.wrapping_mul(GOLDEN))),
        }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    #[inline]
    pub fn bits(&self, a: u64, b: u64) -> u64 {
        let h = mix64(self.key.wrapping_add(a.wrapping_add(1).wrapping_mul(GOLDEN)));
        mix64(h ^ b.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03))
    }

    /// Uniform draw on (0, 1].
    #[inline]
    pub fn uniform(&self, a: u64, b: u64) -> f64 {
        ((self.bits(a, b) >> 11) + 1) as f64 * TWO_POW_M53
    }

    /// A sequential generator seeded from this stream, for shuffles.
    pub fn rng(&self, id: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derive(id).key)
    }
}

impl NormalSource for NoiseStream {
    /// Box-Muller over a class pair: classes `2j` and `2j + 1` share the
    /// uniforms and take the cosine and sine branch respectively.
    #[inline]
    fn normal(&self, sample: usize, class: usize) -> f64 {
        let pair = (class / 2) as u64;
        let row = (sample as u64) << 1;
        let u1 = self.uniform(row, pair);
        let u2 = self.uniform(row | 1, pair);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        if class.is_multiple_of(2) {
            r * theta.cos()
        } else {
            r * theta.sin()
        }
    }
}

/// Explicit S x K matrix of draws, row-major by sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DrawMatrix {
    classes: usize,
    values: Vec<f64>,
}

impl DrawMatrix {
    pub fn new(classes: usize, values: Vec<f64>) -> Self {
        assert!(classes > 0 && values.len().is_multiple_of(classes), "ragged draw matrix");
        Self { classes, values }
    }

    pub fn from_source(src: &impl NormalSource, samples: usize, classes: usize) -> Self {
        let mut values = Vec::with_capacity(samples * classes);
        for s in 0..samples {
            for c in 0..classes {
                values.push(src.normal(s, c));
            }
        }
        Self { classes, values }
    }

    pub fn samples(&self) -> usize {
        self.values.len() / self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.classes..(s + 1) * self.classes]
    }

    /// Reorders the class columns: new column `j` is old column `perm[j]`.
    pub fn permute_classes(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.classes);
        let mut values = Vec::with_capacity(self.values.len());
        for s in 0..self.samples() {
            let row = self.row(s);
            values.extend(perm.iter().map(|&p| row[p]));
        }
        Self {
            classes: self.classes,
            values,
        }
    }
}

impl NormalSource for DrawMatrix {
    fn normal(&self, sample: usize, class: usize) -> f64 {
        self.values[sample * self.classes + class]
    }
}

/// Antithetic pairing: odd samples reuse the negated draws of the preceding
/// even sample.
pub struct Antithetic<'a, N: NormalSource>(pub &'a N);

impl<N: NormalSource> NormalSource for Antithetic<'_, N> {
    fn normal(&self, sample: usize, class: usize) -> f64 {
        if sample % 2 == 1 {
            -self.0.normal(sample - 1, class)
        } else {
            self.0.normal(sample, class)
        }
    }
}
