//! Per-instance seeds from a master seed.
//!
//! Instance `k` receives the `k`-th output of a splitmix64 stream started at the
//! master seed, so any instance can be reproduced without running the others:
//! `seed_k = mix(master + (k + 1) · 0x9E3779B97F4A7C15)`.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn instance_seed(master: u64, k: u64) -> u64 {
    mix(master.wrapping_add(k.wrapping_add(1).wrapping_mul(GAMMA)))
}
