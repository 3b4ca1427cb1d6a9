//! Deterministic 64-bit splittable generator (splitmix64).
//!
//! One generator type for the whole crate. Every stochastic entry point takes
//! an explicit seed, and independent streams are carved out with [`Rng::derive`]
//! so that adding a consumer never perturbs existing streams.

#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed.wrapping_add(GOLDEN) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// A child generator whose stream is independent of `self`'s future output.
    pub fn split(&mut self) -> Rng {
        Rng::new(self.next_u64())
    }

    /// A labeled child stream: same seed + same label always yields the same
    /// stream, regardless of what else was drawn from the parent.
    pub fn derive(seed: u64, label: &str) -> Rng {
        // FNV-1a over the label, folded into the seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let mut r = Rng::new(seed ^ h);
        // burn one draw to decorrelate nearby seeds
        r.next_u64();
        r
    }
}
