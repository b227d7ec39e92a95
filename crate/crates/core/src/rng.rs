//! A small, fully specified PRNG for dataset shuffling, balancing and splitting.
//!
//! Dataset manipulation has to be reproducible from other languages, so it
//! cannot depend on the internals of a general-purpose RNG crate. Everything
//! here is a few lines of 64-bit integer arithmetic:
//!
//! * `next_u64`: SplitMix64 (`state += 0x9E3779B97F4A7C15`, then the
//!   standard two xor-shift-multiply rounds).
//! * `below(n)`: `(next_u64() as u128 * n as u128) >> 64`.
//! * `shuffle`: Fisher-Yates from the last index down to 1, swapping `i`
//!   with `below(i + 1)`.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `0..bound`. `bound` must be non-zero.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
