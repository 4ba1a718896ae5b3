//! Portable seeded randomness.
//!
//! Every random draw in the crate goes through [`SeededRng`], a PCG32
//! (XSH-RR, 64-bit state) generator. A generator is derived from a user
//! seed and a fixed [`Stream`] id via `Pcg32::new(seed, stream)`, so the
//! split, the initialization, the minibatch order and the synthetic data
//! are independent of each other and reproducible by any PCG32
//! implementation:
//!
//! * `uniform()` = `(next_u64 >> 11) * 2^-53`, where `next_u64` is two
//!   consecutive `u32` outputs, low word first;
//! * `below(n)` = `(next_u32 as u64 * n) >> 32`;
//! * `normal()` = Box-Muller cosine branch on two `uniform()` draws;
//! * `shuffle` = Fisher-Yates from the last index down, using `below(i + 1)`.

use rand_core::Rng;
use rand_pcg::Pcg32;

/// Stream ids. Changing these changes every derived random sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Init = 2,
    Batches = 3,
    Synthetic = 4,
    SyntheticRule = 5,
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Pcg32,
}

impl SeededRng {
    pub fn new(seed: u64, stream: Stream) -> Self {
        Self {
            inner: Pcg32::new(seed, stream as u64),
        }
    }

    pub fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Integer in `0..n`. `n` must be below `2^32`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0 && (n as u64) <= u32::MAX as u64 + 1);
        ((self.inner.next_u32() as u64 * n as u64) >> 32) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}
