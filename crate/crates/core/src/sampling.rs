//! Deterministic item sampling.
//!
//! Every item draws from its own ChaCha stream selected by `(seed, index)`,
//! so a sampled market never depends on evaluation order or thread count.

use alloc::vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::market::FiniteMarket;
use crate::spec::LongRunSpec;

/// Random stream dedicated to item `index` under `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw on `[0, 1)` with 53 random bits.
pub fn unit_uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `rep` at market size `t`, derived from the base seed
/// alone.
pub fn derive_seed(base_seed: u64, t: usize, rep: usize) -> u64 {
    mix64(mix64(mix64(base_seed) ^ t as u64) ^ (rep as u64).rotate_left(32))
}

/// Draws `t` items i.i.d. from the supply distribution and evaluates every
/// buyer's valuation on them.
pub fn sample_items(spec: &LongRunSpec, t: usize, seed: u64) -> Result<FiniteMarket> {
    if t == 0 {
        return Err(Error::NoItems);
    }
    spec.validate()?;
    let n = spec.n;
    let dim = spec.dim();
    let mut values = vec![0.0; n * t];
    let mut theta = vec![0.0; dim];
    for item in 0..t {
        let mut rng = item_rng(seed, item as u64);
        theta.iter_mut().for_each(|x| *x = unit_uniform(&mut rng));
        for buyer in 0..n {
            // Clamp roundoff below zero for valuations touching zero on the support.
            values[buyer * t + item] = spec.value(buyer, &theta).max(0.0);
        }
    }
    FiniteMarket::from_parts(n, t, values, spec.budgets.clone(), Some(seed))
}
