//! Root-seed derivation.
//!
//! All randomness in a run flows from one root seed. Sub-streams are
//! derived by hashing the task label and index into the root with
//! FNV-1a and a splitmix64 finalizer, so every sampled artifact is
//! reproducible from (root seed, label, index) alone and independent
//! tasks never share a stream.

/// Derive the seed for task `label` at `index` from the root seed.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325; // FNV offset basis
    for &b in label.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix64(root ^ h ^ index.wrapping_mul(0x9e3779b97f4a7c15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
