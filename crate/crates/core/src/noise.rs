//! Deterministic noise paths.
//!
//! Every random draw in the lab is addressed, not streamed: the value at
//! (seed, purpose, path, time-index) is produced by seeking a ChaCha12
//! keystream to that counter.  Ensembles are therefore bit-identical no
//! matter how work is scheduled across workers, and a path window can be
//! grown or shifted without touching any previously produced value.

use crate::map::NoiseModel;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

/// Independent draw streams multiplexed into the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// The noise sequence omega_i itself.
    Noise = 0,
    /// Initial conditions x0 for ensemble members.
    Init = 1,
    /// Future-resampling draws used by the stopping-time check.
    Resample = 2,
    /// Monte-Carlo nodes for correlation estimates.
    Mc = 3,
    /// Scratch draws for sampled diagnostics.
    Diag = 4,
}

/// Uniform draw in [0,1) at an absolute counter address.
pub fn draw_uniform(seed: u64, purpose: Purpose, path: u64, index: i64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) ^ (path & 0x00ff_ffff_ffff_ffff));
    // zig-zag fold of the signed index; two 32-bit words per u64 draw
    let folded = if index >= 0 {
        (index as u64) << 1
    } else {
        (((-(index + 1)) as u64) << 1) | 1
    };
    rng.set_word_pos((folded as u128) << 1);
    let u = rng.next_u64();
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("path window [{lo}, {hi}) does not cover index {index}")]
    OutOfWindow { lo: i64, hi: i64, index: i64 },
}

/// A finite two-sided window of the i.i.d. noise sequence.
///
/// Values regenerate from (seed, path id, absolute index); `shift(k)` only
/// relabels indices, so the shifted value at `i` equals the original at
/// `i + k` bit-for-bit.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub model: NoiseModel,
    pub seed: u64,
    pub path_id: u64,
    /// Absolute index of the relative origin (the theta-shift applied so far).
    pub offset: i64,
    lo: i64,
    hi: i64,
}

impl NoisePath {
    pub fn new(
        model: NoiseModel,
        seed: u64,
        path_id: u64,
        past_len: usize,
        future_len: usize,
    ) -> NoisePath {
        NoisePath {
            model,
            seed,
            path_id,
            offset: 0,
            lo: -(past_len as i64),
            hi: future_len as i64,
        }
    }

    pub fn past_len(&self) -> usize {
        (-self.lo).max(0) as usize
    }

    pub fn future_len(&self) -> usize {
        self.hi.max(0) as usize
    }

    pub fn covers(&self, lo: i64, hi: i64) -> bool {
        self.lo <= lo && hi <= self.hi
    }

    /// Noise value omega_i for a relative index in the current window.
    pub fn value(&self, i: i64) -> f64 {
        self.try_value(i).unwrap()
    }

    pub fn try_value(&self, i: i64) -> Result<f64, NoiseError> {
        if i < self.lo || i >= self.hi {
            return Err(NoiseError::OutOfWindow {
                lo: self.lo,
                hi: self.hi,
                index: i,
            });
        }
        let u = draw_uniform(self.seed, Purpose::Noise, self.path_id, self.offset + i);
        Ok(self.model.epsilon * (2.0 * u - 1.0))
    }

    /// The shift map theta^k: relabels indices so value(i) == old value(i+k).
    pub fn shift(&self, k: i64) -> NoisePath {
        NoisePath {
            model: self.model,
            seed: self.seed,
            path_id: self.path_id,
            offset: self.offset + k,
            lo: self.lo - k,
            hi: self.hi - k,
        }
    }

    /// Same path with the window grown to at least the given extents.
    pub fn extended(&self, past_len: usize, future_len: usize) -> NoisePath {
        NoisePath {
            model: self.model,
            seed: self.seed,
            path_id: self.path_id,
            offset: self.offset,
            lo: self.lo.min(-(past_len as i64)),
            hi: self.hi.max(future_len as i64),
        }
    }

    /// Contiguous values for relative indices [from, to).
    pub fn slice(&self, from: i64, to: i64) -> Vec<f64> {
        (from..to).map(|i| self.value(i)).collect()
    }

    /// A path identical on indices < split but independently resampled from
    /// `split` on (relative to the current origin).
    pub fn resampled_future(&self, split: i64, resample_tag: u64) -> ResampledPath {
        ResampledPath {
            base: self.clone(),
            split,
            tag: resample_tag,
        }
    }
}

/// Lazily resampled variant of a path, used by the stopping-time check.
#[derive(Debug, Clone)]
pub struct ResampledPath {
    base: NoisePath,
    split: i64,
    tag: u64,
}

impl ResampledPath {
    pub fn value(&self, i: i64) -> f64 {
        if i < self.split {
            self.base.value(i)
        } else {
            let u = draw_uniform(
                self.base.seed ^ self.tag.rotate_left(17),
                Purpose::Resample,
                self.base.path_id,
                self.base.offset + i,
            );
            self.base.model.epsilon * (2.0 * u - 1.0)
        }
    }

    pub fn values(&self, lo: i64, hi: i64) -> Vec<f64> {
        (lo..hi).map(|i| self.value(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> NoiseModel {
        NoiseModel::new(0.05)
    }

    #[test]
    fn values_bounded_and_reproducible() {
        let p = NoisePath::new(model(), 1, 0, 10, 100);
        for i in -10..100 {
            let v = p.value(i);
            assert!(v.abs() <= 0.05);
            assert_eq!(v, p.value(i), "regeneration must be bit-stable");
        }
    }

    #[test]
    fn window_independence() {
        let small = NoisePath::new(model(), 7, 3, 0, 10);
        let large = NoisePath::new(model(), 7, 3, 50, 1000);
        for i in 0..10 {
            assert_eq!(small.value(i), large.value(i));
        }
    }

    #[test]
    fn shift_relabels() {
        let p = NoisePath::new(model(), 42, 1, 20, 200);
        let s = p.shift(5);
        for i in -5..100 {
            assert_eq!(s.value(i), p.value(i + 5));
        }
        // theta^a theta^b = theta^(a+b)
        let s2 = s.shift(-3);
        for i in 0..50 {
            assert_eq!(s2.value(i), p.value(i + 2));
        }
    }

    #[test]
    fn out_of_window_errors() {
        let p = NoisePath::new(model(), 1, 0, 0, 0);
        assert!(matches!(p.try_value(0), Err(NoiseError::OutOfWindow { .. })));
    }

    #[test]
    fn paths_differ_and_streams_differ() {
        let p0 = NoisePath::new(model(), 1, 0, 0, 50);
        let p1 = NoisePath::new(model(), 1, 1, 0, 50);
        let same = (0..50).filter(|&i| p0.value(i) == p1.value(i)).count();
        assert!(same < 3);
        let init: Vec<f64> = (0..50)
            .map(|i| draw_uniform(1, Purpose::Init, 0, i))
            .collect();
        let noise: Vec<f64> = (0..50)
            .map(|i| draw_uniform(1, Purpose::Noise, 0, i))
            .collect();
        assert_ne!(init, noise);
    }

    #[test]
    fn resampled_future_agrees_on_past() {
        let p = NoisePath::new(model(), 9, 2, 0, 100);
        let r = p.resampled_future(40, 0xABCD);
        for i in 0..40 {
            assert_eq!(r.value(i), p.value(i));
        }
        let changed = (40..100).filter(|&i| r.value(i) != p.value(i)).count();
        assert!(changed > 50);
    }

    #[test]
    fn uniform_marginals_rough() {
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|i| draw_uniform(5, Purpose::Noise, 0, i))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.02);
    }
}
