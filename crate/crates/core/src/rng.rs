//! Seeded random streams.
//!
//! Each run owns two independent ChaCha streams derived from one seed:
//! stream 0 drives arrivals and stream 1 drives policy draws, so changing
//! how the policy consumes randomness never moves an arrival.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const ARRIVAL_STREAM: u64 = 0;
const POLICY_STREAM: u64 = 1;

/// Source of uniform draws in `[0, 1)`.
pub trait UniformSource {
    fn uniform(&mut self) -> f64;
}

impl UniformSource for ChaCha8Rng {
    fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }
}

/// Replays a fixed list of draws, then cycles.
#[derive(Debug, Clone)]
pub struct ScriptedUniforms {
    values: Vec<f64>,
    next: usize,
}

impl ScriptedUniforms {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(!values.is_empty(), "scripted draws must not be empty");
        ScriptedUniforms { values, next: 0 }
    }
}

impl UniformSource for ScriptedUniforms {
    fn uniform(&mut self) -> f64 {
        let v = self.values[self.next % self.values.len()];
        self.next += 1;
        v
    }
}

pub fn arrival_stream(seed: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ARRIVAL_STREAM);
    rng
}

pub fn policy_stream(seed: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POLICY_STREAM);
    rng
}

/// SplitMix64 finaliser; mixes structured inputs into a well-spread seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}
