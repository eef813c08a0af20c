//! Deterministic, counter-based randomness.
//!
//! Nothing in this crate touches a platform RNG. Every random quantity is a
//! pure function of a master seed plus explicit stream/counter coordinates:
//! site values hash `(master_seed, env_index, site)`, so environment `i` can
//! be regenerated without generating environments `0..i-1`, and a window can
//! be widened without disturbing sites that were already drawn.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const COUNTER_MULT: u64 = 0xd1b5_4a32_d192_ed03;

/// splitmix64 finalizer; a bijective 64-bit mix.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One word of a keyed counter stream.
#[inline]
pub fn keyed(master_seed: u64, stream: u64, counter: u64) -> u64 {
    let mut h = mix64(master_seed.wrapping_add(GOLDEN));
    h = mix64(h ^ stream.wrapping_mul(GOLDEN));
    mix64(h ^ counter.wrapping_mul(COUNTER_MULT))
}

/// Signed lattice coordinates mapped onto the counter domain.
#[inline]
pub fn zigzag(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

/// Hash of a lattice site (any dimension) under a given environment index.
#[inline]
pub fn site_bits(master_seed: u64, env_index: u64, site: &[i64]) -> u64 {
    let mut h = mix64(master_seed.wrapping_add(GOLDEN));
    h = mix64(h ^ env_index.wrapping_mul(GOLDEN));
    for (axis, &c) in site.iter().enumerate() {
        h = mix64(h ^ zigzag(c).wrapping_mul(COUNTER_MULT) ^ (axis as u64).wrapping_mul(GOLDEN));
    }
    h
}

/// Uniform in [0, 1) from 53 high bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential generator for path sampling. One stream per sampled path,
/// keyed so streams never need coordination across threads.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

/// Distinguishes path-sampling streams from site hashing under the same key.
const PATH_SALT: u64 = 0x7061_7468_5f73_616c;

impl Stream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        Stream {
            state: keyed(master_seed, stream, PATH_SALT),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }
}
