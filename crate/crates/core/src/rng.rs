//! Deterministic per-pixel random streams.
//!
//! The simulator must produce identical output for any worker count and across
//! platforms, so randomness is keyed by `(seed, purpose, x, y)` with a
//! SplitMix64 generator instead of a shared sequential RNG. No `rand`
//! dependency: results then cannot drift with upstream algorithm changes.

/// Purpose tag separating independent streams drawn from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Per-pixel threshold deviation field.
    Threshold,
    /// Per-pixel pseudo-event process.
    Pseudo,
    /// Pixel-pair sampling in metrics.
    Sampling,
}

impl StreamKind {
    fn tag(self) -> u64 {
        match self {
            StreamKind::Threshold => 0x7468_7265_7368_6f6c,
            StreamKind::Pseudo => 0x7073_6575_646f_6576,
            StreamKind::Sampling => 0x7361_6d70_6c69_6e67,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed from a base seed and a salt. Used to give
/// calibration captures pseudo-event streams unrelated to the evaluation
/// capture at the same base seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    splitmix64(base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Deterministic generator for one `(seed, purpose, pixel)` stream.
#[derive(Debug, Clone)]
pub struct PixelRng {
    state: u64,
}

impl PixelRng {
    pub fn new(seed: u64, kind: StreamKind, x: u32, y: u32) -> Self {
        let mut h = splitmix64(seed ^ kind.tag());
        h ^= (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        h ^= (y as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        PixelRng {
            state: splitmix64(h),
        }
    }

    /// Stream without a pixel association (seeded sampling loops).
    pub fn for_sequence(seed: u64, kind: StreamKind) -> Self {
        Self::new(seed, kind, 0, 0)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform double in `[0, 1)` built from the top 53 bits.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        let mantissa = self.next_u64() >> 11;
        (mantissa as f64) * (1.0 / ((1u64 << 53) as f64))
    }

    /// Uniform double in `(0, 1)`, never exactly zero (safe under `ln`).
    #[inline]
    fn next_unit_open(&mut self) -> f64 {
        let mantissa = self.next_u64() >> 11;
        ((mantissa as f64) + 0.5) * (1.0 / ((1u64 << 53) as f64))
    }

    /// Standard normal deviate (Box-Muller).
    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_unit_open();
        let u2 = self.next_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Poisson count with the given mean, via exponential inter-arrival gaps.
    ///
    /// Linear in `mean`, exact for any non-negative finite mean.
    pub fn next_poisson(&mut self, mean: f64) -> u64 {
        assert!(mean.is_finite() && mean >= 0.0);
        if mean == 0.0 {
            return 0;
        }
        let mut count = 0u64;
        let mut acc = 0.0f64;
        loop {
            acc -= self.next_unit_open().ln();
            if acc > mean {
                return count;
            }
            count += 1;
        }
    }

    /// Fair coin.
    #[inline]
    pub fn next_bool(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}
