//! Particle-filtering primitives: seedable hierarchical random streams,
//! weight normalization, systematic resampling and effective sample size.
//!
//! Every source of randomness in the crate is a [`RandomStream`]. Streams are
//! cheap value types; a parallel unit of work derives its own child stream
//! from data that identifies it (run index, time step, hypothesis bitmask,
//! group label), so results never depend on thread scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Identical `(seed, stream_id)` pairs produce bit-identical draw sequences
/// on every platform and under any parallel schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
}

impl RandomStream {
    /// Root stream of a run hierarchy.
    pub fn root(seed: u64) -> Self {
        RandomStream { seed, stream_id: 0 }
    }

    /// Derives the child stream tagged `tag`. Distinct tags yield
    /// statistically independent streams; the derivation is pure.
    pub fn child(&self, tag: u64) -> Self {
        RandomStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag ^ 0xa076_1d64_78bd_642f)),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Instantiates the generator for this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut bytes = [0u8; 32];
        let mut s = splitmix64(self.seed) ^ splitmix64(self.stream_id ^ 0x2545_f491_4f6c_dd1d);
        for chunk in bytes.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        ChaCha12Rng::from_seed(bytes)
    }
}

/// Normalizes non-negative weights to sum to one.
///
/// An all-zero (or empty) vector is the degenerate-hypothesis condition and
/// is reported as [`Error::ZeroWeightSum`]; the caller decides what dies.
pub fn normalize(weights: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::ZeroWeightSum);
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

/// `log(Σ exp(l))` without overflow; `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Effective sample size `1 / Σ w²` of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let sq: f64 = weights.iter().map(|w| w * w).sum();
    if sq > 0.0 {
        1.0 / sq
    } else {
        0.0
    }
}

/// Systematic resampling: `n_out` equally weighted draws positioned by a
/// single uniform offset, so the copy count of particle `j` is
/// `floor` or `ceil` of `n_out * w_j`.
///
/// Weights must be normalized. Returns indices into `weights`.
pub fn resample_systematic<R: Rng>(weights: &[f64], n_out: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    let mut out = Vec::with_capacity(n_out);
    if weights.is_empty() || n_out == 0 {
        return out;
    }
    let offset: f64 = rng.gen::<f64>();
    let step = 1.0 / n_out as f64;
    let mut cumulative = weights[0];
    let mut j = 0usize;
    for i in 0..n_out {
        let position = (i as f64 + offset) * step;
        while position >= cumulative && j + 1 < weights.len() {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_preserves_proportions() {
        assert_eq!(normalize(&[2.0, 2.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(normalize(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(normalize(&[0.0, 3.0, 1.0]).unwrap(), vec![0.0, 0.75, 0.25]);
    }

    #[test]
    fn normalize_rejects_zero_mass() {
        assert!(matches!(
            normalize(&[0.0, 0.0]),
            Err(Error::ZeroWeightSum)
        ));
        assert!(matches!(normalize(&[]), Err(Error::ZeroWeightSum)));
    }

    #[test]
    fn ess_examples() {
        let n = 7;
        let uniform = vec![1.0 / n as f64; n];
        assert!((effective_sample_size(&uniform) - n as f64).abs() < 1e-12);
        assert!((effective_sample_size(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((effective_sample_size(&[0.5, 0.5, 0.0, 0.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn systematic_is_deterministic_on_quarter_split() {
        // With weights [0.75, 0.25] and N=4 the strata force exactly
        // three copies of particle 0 and one of particle 1 for any offset.
        for seed in 0..20 {
            let mut rng = RandomStream::root(seed).rng();
            let idx = resample_systematic(&[0.75, 0.25], 4, &mut rng);
            assert_eq!(idx.iter().filter(|&&i| i == 0).count(), 3);
            assert_eq!(idx.iter().filter(|&&i| i == 1).count(), 1);
        }
    }

    #[test]
    fn systematic_degenerate_weight() {
        let mut rng = RandomStream::root(7).rng();
        let idx = resample_systematic(&[1.0, 0.0, 0.0], 9, &mut rng);
        assert!(idx.iter().all(|&i| i == 0));
    }

    #[test]
    fn systematic_uniform_input_is_identity() {
        let w = vec![0.25; 4];
        let mut rng = RandomStream::root(3).rng();
        assert_eq!(resample_systematic(&w, 4, &mut rng), vec![0, 1, 2, 3]);
    }

    #[test]
    fn resampling_is_unbiased() {
        // Mean copy count of each particle within 3 standard errors of N*w.
        let weights = [0.5, 0.3, 0.15, 0.05];
        let n = 8usize;
        let reps = 10_000;
        let mut counts = [0f64; 4];
        for rep in 0..reps {
            let mut rng = RandomStream::root(11).child(rep).rng();
            for i in resample_systematic(&weights, n, &mut rng) {
                counts[i] += 1.0;
            }
        }
        for (i, &w) in weights.iter().enumerate() {
            let mean = counts[i] / reps as f64;
            let expect = n as f64 * w;
            // Systematic copies vary by at most 1 around N*w.
            let se = 1.0 / (reps as f64).sqrt();
            assert!(
                (mean - expect).abs() < 3.0 * se + 1e-9,
                "particle {i}: mean {mean} vs {expect}"
            );
        }
    }

    #[test]
    fn identical_streams_identical_draws() {
        let a = RandomStream::root(42).child(3).child(9);
        let b = RandomStream::root(42).child(3).child(9);
        let draws_a: Vec<f64> = {
            let mut r = a.rng();
            (0..32).map(|_| r.gen::<f64>()).collect()
        };
        let draws_b: Vec<f64> = {
            let mut r = b.rng();
            (0..32).map(|_| r.gen::<f64>()).collect()
        };
        assert_eq!(draws_a, draws_b);
        assert_ne!(
            draws_a,
            {
                let mut r = RandomStream::root(42).child(3).child(10).rng();
                (0..32).map(|_| r.gen::<f64>()).collect::<Vec<f64>>()
            },
            "sibling streams must differ"
        );
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}
