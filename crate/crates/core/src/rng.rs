//! Counter-based random streams.
//!
//! Every Gaussian draw is a pure function of `(seed, path, lane, index)`: the
//! ChaCha8 block function is keyed by the master seed, the stream id encodes
//! `(path, lane)`, and normal number `k` consumes exactly four 32-bit words at
//! word position `4⌊k/2⌋` (one Box-Muller pair). Parallel workers therefore
//! reproduce the same numbers regardless of scheduling.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Number of independent lanes per path id.
pub const LANES: u64 = 4;

/// Identifies one noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseKey {
    pub seed: u64,
    pub path: u64,
    pub lane: u64,
}

impl NoiseKey {
    pub fn new(seed: u64, path: u64, lane: u64) -> Self {
        assert!(lane < LANES, "lane {lane} out of range");
        Self { seed, path, lane }
    }

    pub fn stream_id(&self) -> u64 {
        self.path.wrapping_mul(LANES).wrapping_add(self.lane)
    }
}

fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    let r = (-2.0 * unit_open(a).ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * unit_open(b);
    (r * theta.cos(), r * theta.sin())
}

fn keyed_rng(key: NoiseKey) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    rng.set_stream(key.stream_id());
    rng
}

/// Sequential reader of standard normals from one keyed stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(key: NoiseKey) -> Self {
        Self {
            rng: keyed_rng(key),
            spare: None,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z0, z1) = box_muller(self.rng.next_u64(), self.rng.next_u64());
        self.spare = Some(z1);
        z0
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for o in out {
            *o = self.next_normal();
        }
    }
}

/// Random access: the `index`-th standard normal of the stream.
pub fn normal_at(key: NoiseKey, index: u64) -> f64 {
    let mut rng = keyed_rng(key);
    rng.set_word_pos(4 * (index / 2) as u128);
    let (z0, z1) = box_muller(rng.next_u64(), rng.next_u64());
    if index % 2 == 0 {
        z0
    } else {
        z1
    }
}

/// Sequential uniforms on `[0, 1)` from one keyed stream.
pub struct UniformStream {
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(key: NoiseKey) -> Self {
        Self {
            rng: keyed_rng(key),
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_below(&mut self, n: usize) -> usize {
        ((self.next_uniform() * n as f64) as usize).min(n - 1)
    }
}
