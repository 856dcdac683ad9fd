//! Named random streams derived from a single master seed.
//!
//! Every stochastic draw in a run comes from a stream keyed by a component
//! name plus integer coordinates (phase, trial, generation, ...). A stream can
//! be recreated from its key alone, so restoring a checkpoint needs no
//! generator state and independent evaluations never share a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derive a generator for `(master, name, coords)`.
pub fn stream(master: u64, name: &str, coords: &[u64]) -> StreamRng {
    StreamRng::from_seed(stream_seed(master, name, coords))
}

/// Derive a 64-bit seed for `(master, name, coords)`.
pub fn sub_seed(master: u64, name: &str, coords: &[u64]) -> u64 {
    let bytes = stream_seed(master, name, coords);
    u64::from_le_bytes(bytes[..8].try_into().expect("32-byte digest"))
}

fn stream_seed(master: u64, name: &str, coords: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"cmrl-stream");
    hasher.update(master.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    for c in coords {
        hasher.update(c.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

/// Hex SHA-256 over the bit patterns of a float vector.
pub fn hash_f64s(values: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in values {
        hasher.update(v.to_bits().to_le_bytes());
    }
    hex::encode(hasher.finalize())
}
