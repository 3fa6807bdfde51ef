//! Portable pseudo-random primitives used for green-list derivation.
//!
//! Everything here is pinned bit-for-bit so that a generator and a detector
//! written in different languages agree on every green list:
//!
//! * `splitmix64(x)` is the first output of a SplitMix64 stream whose state
//!   starts at `x` (state is advanced by the golden gamma before mixing).
//! * [`Xorshift64Star`] is seeded with `splitmix64(seed)`; a zero state is
//!   replaced by the golden gamma.
//! * Bounded draws use the high 64 bits of a 128-bit product
//!   (`(next * bound) >> 64`), never a modulo.

/// Golden-ratio increment of SplitMix64.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const XORSHIFT_STAR_MULT: u64 = 0x2545_F491_4F6C_DD1D;

/// One SplitMix64 step applied to `x`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for sub-stream `stream` of a run seeded with `base`.
pub fn stream_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

/// xorshift64* generator (Vigna's 12/25/27 variant).
#[derive(Debug, Clone)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn from_seed(seed: u64) -> Self {
        let state = match splitmix64(seed) {
            0 => GOLDEN_GAMMA,
            s => s,
        };
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(XORSHIFT_STAR_MULT)
    }

    /// Uniform integer in `0..bound`. `bound` must be nonzero.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    /// In-place Fisher-Yates shuffle, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
