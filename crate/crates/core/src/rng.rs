//! Deterministic sampling source.
//!
//! All randomized sweeps in this crate draw from xorshift64* with the
//! published constants (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).
//! The algorithm is pinned by name so experiments reproduce bit-for-bit
//! across implementations and versions; a library RNG whose stream may
//! change between releases would silently break artifact determinism.

/// xorshift64* generator. State must be nonzero; a zero seed is remapped.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        // 0 is the one forbidden state for xorshift; remap it to a fixed
        // odd constant so every u64 is a usable seed.
        let state = if seed == 0 { 0x9E3779B97F4A7C15 } else { seed };
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform draw from `0..bound` (`bound > 0`) by rejection-free
    /// multiply-shift; bias is < 2^-32 for the bounds used here (all far
    /// below 2^32), which is irrelevant at desk-scale sample counts.
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() >> 32).wrapping_mul(bound as u64) >> 32) as usize
    }

    /// Fisher-Yates shuffle (deterministic given the seed).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
