//! Seeded random streams.
//!
//! Every random quantity in a run is drawn from a stream keyed by the run seed
//! plus a purpose tag and indices, so results never depend on the order in
//! which independent pieces of work are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

/// Purpose tags. Distinct tags never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Task = 1,
    Eval = 2,
    Noise = 3,
    Rollout = 4,
    FineTune = 5,
    Init = 6,
    Holdout = 7,
    Martingale = 8,
    Misc = 9,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, purpose, indices)`.
pub fn stream(seed: u64, purpose: Purpose, indices: &[u64]) -> StreamRng {
    let mut key = splitmix(seed ^ splitmix(purpose as u64));
    for &i in indices {
        key = splitmix(key ^ splitmix(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(purpose as u64);
    rng
}

/// A standard-normal vector with recorded provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDraw {
    pub epsilon: Vec<f64>,
    pub seed: u64,
    pub index: u64,
}

impl NoiseDraw {
    /// Same `(seed, index, dim)` always yields the same vector.
    pub fn new(seed: u64, index: u64, dim: usize) -> Self {
        let mut rng = stream(seed, Purpose::Noise, &[index]);
        let epsilon = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        NoiseDraw {
            epsilon,
            seed,
            index,
        }
    }

    /// Wraps an explicit vector; used for zero noise and hand-built tests.
    pub fn from_vec(epsilon: Vec<f64>) -> Self {
        NoiseDraw {
            epsilon,
            seed: 0,
            index: 0,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_vec(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.epsilon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epsilon.is_empty()
    }
}

pub fn standard_normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}
