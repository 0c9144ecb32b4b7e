//! Seeded randomness.
//!
//! Every run draws from a single SplitMix64 stream. The generator is a
//! 64-bit counter advanced by the golden-ratio increment and passed through
//! the Stafford "mix13" finalizer, so any implementation that reproduces the
//! constants below reproduces the stream bit for bit.
//!
//! Per round the engine consumes draws in a fixed order:
//!
//! 1. leader election (`next_f64`),
//! 2. artifact kind, Strongchain and Fruitchain only (`next_f64`),
//! 3. tie branch for an honest leader, only while a tie is open (`next_f64`).

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stafford mix13 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. Uses the widening-multiply reduction.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}

/// Seed for one run of an experiment cell.
///
/// `h = mix64(master)`, `h = mix64(h ^ run * GOLDEN_GAMMA)`, `h = mix64(h ^ digest)`.
/// Each step is a bijection of the previous value, so for a fixed master seed
/// and digest distinct run indices never collide.
pub fn derive_run_seed(master_seed: u64, run_index: u64, config_digest: u64) -> u64 {
    let h = mix64(master_seed);
    let h = mix64(h ^ run_index.wrapping_mul(GOLDEN_GAMMA));
    mix64(h ^ config_digest)
}
