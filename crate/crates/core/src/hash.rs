use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `data`, truncated to `chars` hex digits.
pub(crate) fn sha256_hex(data: &[u8], chars: usize) -> String {
    let digest = Sha256::digest(data);
    let mut out = hex::encode(digest.as_slice());
    out.truncate(chars);
    out
}

/// First eight bytes of SHA-256 of `data` as a little-endian integer.
pub(crate) fn sha256_u64(data: &[u8]) -> u64 {
    let digest = Sha256::digest(data);
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest.as_slice()[..8]);
    u64::from_le_bytes(bytes)
}
