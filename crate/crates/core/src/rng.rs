//! Deterministic random streams.
//!
//! Every random decision in the crate is drawn from a ChaCha8 stream keyed by
//! `(rng_seed, domain)` and selected by a 64-bit stream index, so work item `i`
//! can be replayed in isolation and parallel execution matches sequential
//! execution bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep independent consumers of one user seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Cascade = 0x6361_7363,
    Graph = 0x6772_6170,
    SeedDraw = 0x7365_6564,
    Spread = 0x7370_7264,
    Worlds = 0x776f_726c,
    Coin = 0x636f_696e,
    Trial = 0x7472_6961,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, domain: Domain) -> u64 {
    mix(seed ^ mix(domain as u64))
}

/// Stream `index` of the generator keyed by `(seed, domain)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(index);
    rng
}
