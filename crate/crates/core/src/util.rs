//! Small shared helpers: deterministic hashing and seed derivation.

/// FNV-1a over bytes. Used for content fingerprints and seed derivation;
/// stable across platforms and releases, unlike `std`'s `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from a base seed and a label (e.g. an epoch index).
/// Mixing through FNV keeps per-epoch streams independent of each other.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut buf = Vec::with_capacity(8 + label.len());
    buf.extend_from_slice(&base.to_le_bytes());
    buf.extend_from_slice(label.as_bytes());
    fnv1a(&buf)
}
