//! Index sampling proportional to squared row or column norms.
//!
//! Draws use the inverse CDF: a uniform `u` in `[0, 1)` is scaled by the
//! total weight and located in the prefix sums by binary search.
//!
//! Randomness comes from [`RandomSource`], a ChaCha8 generator. ChaCha output
//! is specified bit-for-bit, so a seed reproduces the same draws on every
//! platform. Independent streams are split off a master seed with the
//! generator's 64-bit stream counter:
//!
//! * Monte-Carlo trial `k` uses stream `k` of `master_seed` ([`trial_rng`]).
//! * Scenario generation uses stream `u64::MAX` of its seed ([`generation_rng`]),
//!   so a system generated with seed `s` never shares draws with trials run
//!   with the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub type RandomSource = ChaCha8Rng;

pub const GENERATION_STREAM: u64 = u64::MAX;

pub fn trial_rng(master_seed: u64, trial: u64) -> RandomSource {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

pub fn generation_rng(seed: u64) -> RandomSource {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(GENERATION_STREAM);
    rng
}

#[derive(Debug, Clone)]
pub struct NormSampler {
    cumulative: Vec<f64>,
    total: f64,
}

impl NormSampler {
    /// Builds a sampler over `weights`; every weight must be positive and finite.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::DegenerateWeights("no indices".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::DegenerateWeights(format!(
                "index {i} has weight {}; zero-norm rows and columns cannot be sampled",
                weights[i]
            )));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { total: acc, cumulative })
    }

    pub fn from_rows(a: &DenseMatrix) -> Result<Self> {
        Self::from_weights(a.row_sqnorms())
    }

    pub fn from_cols(a: &DenseMatrix) -> Result<Self> {
        Self::from_weights(a.col_sqnorms())
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn probability(&self, i: usize) -> f64 {
        let lo = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - lo) / self.total
    }

    /// Maps a uniform value in `[0, 1)` to an index.
    pub fn index_for(&self, u: f64) -> usize {
        let target = u * self.total;
        // first index whose prefix sum exceeds the target
        let idx = self.cumulative.partition_point(|&c| c <= target);
        idx.min(self.cumulative.len() - 1)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index_for(rng.random::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rows_are_equally_likely() {
        let s = NormSampler::from_rows(&DenseMatrix::identity(2)).unwrap();
        assert_eq!(s.probability(0), 0.5);
        assert_eq!(s.probability(1), 0.5);
    }

    #[test]
    fn skewed_probabilities() {
        let a = DenseMatrix::from_rows(&[[3.0, 4.0], [0.0, 0.0001]]).unwrap();
        let s = NormSampler::from_rows(&a).unwrap();
        let p0 = 25.0 / (25.0 + 1e-8);
        assert!((s.probability(0) - p0).abs() <= 1e-15);
    }

    #[test]
    fn zero_weights_rejected() {
        let z = DenseMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(NormSampler::from_rows(&z).is_err());
        assert!(NormSampler::from_cols(&z).is_err());
        let partial = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!(NormSampler::from_rows(&partial).is_err());
        assert!(NormSampler::from_weights(&[]).is_err());
    }

    #[test]
    fn cdf_edges() {
        let s = NormSampler::from_weights(&[1.0, 1.0]).unwrap();
        assert_eq!(s.index_for(0.0), 0);
        assert_eq!(s.index_for(0.999), 1);
        assert_eq!(s.index_for(0.5), 1);
        assert_eq!(s.index_for(0.4999), 0);
    }

    #[test]
    fn same_seed_same_draws() {
        let s = NormSampler::from_weights(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut a = trial_rng(42, 3);
        let mut b = trial_rng(42, 3);
        let da: Vec<usize> = (0..1000).map(|_| s.draw(&mut a)).collect();
        let db: Vec<usize> = (0..1000).map(|_| s.draw(&mut b)).collect();
        assert_eq!(da, db);
        let mut c = trial_rng(42, 4);
        let dc: Vec<usize> = (0..1000).map(|_| s.draw(&mut c)).collect();
        assert_ne!(da, dc);
    }
}
