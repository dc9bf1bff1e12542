//! Seeded, splittable randomness.
//!
//! Every random draw in the crate comes from a substream addressed by
//! `(seed, tag, index)`: `tag` usually encodes the step counter and `index`
//! the particle. Because a substream depends only on its address, updating
//! particles in parallel produces exactly the same numbers as a serial loop.
//!
//! Substreams are Xoshiro256++ generators whose 256-bit state is four
//! splitmix64 outputs of the hashed address. Seeding is a handful of
//! multiplications, so a fresh generator per particle per step is cheap.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::scalar::Real;

/// Generator type handed out by [`RngStream::substream`].
pub type SubRng = Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream family for a sub-computation (a replicate, a phase).
    pub fn derive(&self, label: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(label.wrapping_add(0xD1B5_4A32_D192_ED03))),
        }
    }

    /// Generator for one `(tag, index)` address.
    pub fn substream(&self, tag: u64, index: u64) -> SubRng {
        let h = splitmix64(splitmix64(splitmix64(self.seed) ^ tag) ^ index.wrapping_mul(0x6A09_E667_F3BC_C909));
        let mut key = [0u8; 32];
        let mut z = h;
        for chunk in key.chunks_exact_mut(8) {
            z = splitmix64(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        SubRng::from_seed(key)
    }
}

pub fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

pub fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>())
}

pub fn fill_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, out: &mut [T]) {
    for v in out {
        *v = normal(rng);
    }
}
