//! Seed derivation and independent random streams.
//!
//! Every stochastic component of a run draws from its own stream so that
//! replaying a pool under a different weighting condition sees the same
//! arrivals, the same crossmatch outcomes and the same sampled betas.
//!
//! Two kinds of stream exist:
//!
//! - sequential streams: a [`ChaCha8Rng`] seeded with `hash64([seed, tag])`;
//! - keyed draws: a uniform variate computed directly from
//!   `hash64([seed, tag, k1, k2, ...])`, used where the draw must not depend on
//!   how many draws happened before it (crossmatch per directed edge, departure
//!   per pair per day).
//!
//! `hash64` folds its inputs through the SplitMix64 finalizer:
//!
//! ```text
//! h = 0x243F6A8885A308D3
//! for p in parts: h = mix64(h ^ p) + 0x9E3779B97F4A7C15   (wrapping)
//! return mix64(h)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn hash64(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h = mix64(h ^ p).wrapping_add(0x9E37_79B9_7F4A_7C15);
    }
    mix64(h)
}

/// FNV-1a over a label, for turning names into hash inputs.
pub fn label_tag(label: &str) -> u64 {
    label.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Uniform variate in `[0, 1)` from a 64-bit key (53 bits of mantissa).
pub fn unit_from_key(key: u64) -> f64 {
    (mix64(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Named sub-streams of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Generation = 1,
    Crossmatch = 2,
    Betas = 3,
    Ties = 4,
    Arrivals = 5,
    Departures = 6,
    Survey = 7,
    Draws = 8,
    EdgeNoise = 9,
}

impl Stream {
    pub fn key(self, seed: u64) -> u64 {
        hash64(&[seed, self as u64])
    }

    pub fn rng(self, seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key(seed))
    }
}

/// Seed for one run of an experiment.
pub fn run_seed(master_seed: u64, run_index: u64) -> u64 {
    hash64(&[master_seed, run_index])
}
