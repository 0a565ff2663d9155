//! Seeded, platform-independent random streams.
//!
//! Everything random in this crate flows through [`SplitMix64`]: a counter
//! style generator whose full behavior fits in a dozen lines, so datasets,
//! initializations, and shuffles are byte-reproducible across platforms and
//! implementations. Gaussians come from Box-Muller over two uniform draws;
//! no state is cached between calls, so every draw consumes a fixed number
//! of raw outputs.
//!
//! Independent sub-streams are derived from a `(seed, stream)` pair, which is
//! how modules keep their randomness isolated (e.g. a split seed never
//! perturbs generated features).

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derives an independent stream from a base seed and a stream tag.
    ///
    /// The tag is mixed through one generator round so that nearby tags
    /// produce unrelated streams.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut base = SplitMix64::new(seed);
        let mixed = base.next_u64();
        SplitMix64::new(mixed ^ stream.wrapping_mul(GOLDEN_GAMMA))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, bound)` via rejection sampling (no modulo bias).
    ///
    /// # Panics
    /// Panics if `bound == 0`.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below requires a positive bound");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let raw = self.next_u64();
            if raw < zone {
                return raw % bound;
            }
        }
    }

    /// Standard normal draw via Box-Muller. Consumes exactly two uniforms.
    pub fn gaussian(&mut self) -> f64 {
        // 1 - u lies in (0, 1], keeping the log argument positive.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        radius * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
