//! Small PCG-XSH-RR 32 generator.
//!
//! Hand-rolled so that trace bytes stay stable regardless of external crate
//! versions; everything seeded from the match config flows through here.

use serde::{Deserialize, Serialize};

const MULTIPLIER: u64 = 6364136223846793005;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pcg32 {
    state: u64,
    inc: u64,
}

impl Pcg32 {
    pub fn new(seed: u64, stream: u64) -> Self {
        let inc = (stream << 1) | 1;
        let mut rng = Pcg32 { state: 0, inc };
        rng.step();
        rng.state = rng.state.wrapping_add(seed);
        rng.step();
        rng
    }

    fn step(&mut self) {
        self.state = self
            .state
            .wrapping_mul(MULTIPLIER)
            .wrapping_add(self.inc);
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.step();
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    /// Uniform in `0..bound` (bound > 0), with rejection to avoid modulo bias.
    pub fn gen_range(&mut self, bound: u32) -> u32 {
        assert!(bound > 0);
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u32();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    /// Uniform in `[0, 1)` with 32 bits of precision.
    pub fn gen_f64(&mut self) -> f64 {
        f64::from(self.next_u32()) / (u64::from(u32::MAX) + 1) as f64
    }

    /// Pick an index into a slice of the given length.
    pub fn pick(&mut self, len: usize) -> usize {
        self.gen_range(len as u32) as usize
    }
}
