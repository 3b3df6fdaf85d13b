//! Stable seed derivation.
//!
//! Streams are keyed by a master seed plus a path of labels and integers, so
//! adding a new stream never perturbs an existing one. The mixing function is
//! splitmix64, which is fixed forever (unlike `std`'s hasher).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A component of a seed-derivation path.
#[derive(Debug, Clone, Copy)]
pub enum Key<'a> {
    Label(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for Key<'a> {
    fn from(s: &'a str) -> Self {
        Key::Label(s)
    }
}

impl From<u64> for Key<'_> {
    fn from(i: u64) -> Self {
        Key::Index(i)
    }
}

impl From<usize> for Key<'_> {
    fn from(i: usize) -> Self {
        Key::Index(i as u64)
    }
}

/// Mixes `keys` into `master`, yielding a well-distributed 64-bit seed.
pub fn derive(master: u64, keys: &[Key<'_>]) -> u64 {
    let mut h = splitmix64(master);
    for key in keys {
        match *key {
            Key::Label(s) => {
                // FNV-1a over the bytes, then mixed; tag 1 separates labels from indices.
                let mut f: u64 = 0xCBF2_9CE4_8422_2325;
                for b in s.bytes() {
                    f ^= u64::from(b);
                    f = f.wrapping_mul(0x0100_0000_01B3);
                }
                h = splitmix64(h ^ splitmix64(f ^ 1));
            }
            Key::Index(i) => h = splitmix64(h ^ splitmix64(i.wrapping_mul(2) ^ 2)),
        }
    }
    h
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Shorthand for `rng(derive(master, keys))`.
pub fn stream(master: u64, keys: &[Key<'_>]) -> Rng {
    rng(derive(master, keys))
}

/// Order-sensitive 64-bit checksum of a float slice's bit patterns.
pub fn checksum(values: impl IntoIterator<Item = f64>) -> u64 {
    values
        .into_iter()
        .fold(0x51ED_270B_2A1F_95C3, |h, v| splitmix64(h ^ v.to_bits()))
}
