//! Small shared utilities: a deterministic counter-based RNG and float
//! formatting used by the text file formats.

/// SplitMix64: a 64-bit counter-based generator (Steele, Lea, Flood 2014).
///
/// The state advances by a fixed odd constant and each output is a bijective
/// finalizer hash of the counter, so the stream is fully determined by the
/// seed, is platform independent, and has no linear-congruential structure.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1), using the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn next_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Format a float with 17 significant decimal digits, enough to round-trip
/// any f64 bit pattern through text.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}
