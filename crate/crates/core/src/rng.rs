//! Portable seeded randomness.
//!
//! Everything random in this crate draws from xoshiro256++ seeded through
//! SplitMix64 (`seed_from_u64`), and maps raw 64-bit outputs to ranges with
//! Lemire's widening-multiply rejection method. Both steps are fixed here so
//! that sample manifests reproduce across platforms and crate upgrades.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub const GENERATOR_NAME: &str = "xoshiro256++ (SplitMix64 seeding)";

pub struct SeededRng(Xoshiro256PlusPlus);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `0..bound`. `bound` must be positive.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty range");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let m = u128::from(self.next_u64()) * u128::from(bound);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// `amount` distinct indices from `0..len`, in draw order, via a partial
    /// Fisher–Yates shuffle.
    pub fn choose_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        assert!(amount <= len);
        let mut pool: Vec<usize> = (0..len).collect();
        for i in 0..amount {
            let j = i + self.below((len - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(amount);
        pool
    }
}
