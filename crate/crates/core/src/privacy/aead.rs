//! Payload encryption for embedding replies: XChaCha20-Poly1305 with
//! counter nonces and replay rejection on the receiving side.
//!
//! Ciphertext layout: `nonce (24) || tag (16) || payload`.

use std::collections::HashSet;

use chacha20poly1305::aead::{AeadInPlace, KeyInit};
use chacha20poly1305::{Tag, XChaCha20Poly1305, XNonce};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const NONCE_LEN: usize = 24;
pub const TAG_LEN: usize = 16;

/// Sending half of a session. Nonces are `prefix (16) || counter (8, BE)`,
/// where the prefix is bound to the key and the sender's name, so two
/// senders sharing a key never collide.
pub struct Sealer {
    cipher: XChaCha20Poly1305,
    prefix: [u8; 16],
    counter: u64,
}

impl Sealer {
    pub fn new(key: &[u8; 32], sender: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"nonce-prefix");
        h.update(key);
        h.update(sender.as_bytes());
        let digest = h.finalize();
        let mut prefix = [0u8; 16];
        prefix.copy_from_slice(&digest[..16]);
        Sealer {
            cipher: XChaCha20Poly1305::new(key.into()),
            prefix,
            counter: 0,
        }
    }

    pub fn seal(&mut self, plaintext: &[u8], aad: &[u8]) -> Result<Vec<u8>> {
        let mut nonce = [0u8; NONCE_LEN];
        nonce[..16].copy_from_slice(&self.prefix);
        nonce[16..].copy_from_slice(&self.counter.to_be_bytes());
        self.counter = self
            .counter
            .checked_add(1)
            .ok_or_else(|| Error::Crypto("nonce counter exhausted".into()))?;
        let mut buf = plaintext.to_vec();
        let tag = self
            .cipher
            .encrypt_in_place_detached(XNonce::from_slice(&nonce), aad, &mut buf)
            .map_err(|_| Error::Crypto("encryption failed".into()))?;
        let mut out = Vec::with_capacity(NONCE_LEN + TAG_LEN + buf.len());
        out.extend_from_slice(&nonce);
        out.extend_from_slice(&tag);
        out.extend_from_slice(&buf);
        Ok(out)
    }
}

/// Receiving half of a session; remembers every nonce it accepted.
pub struct Opener {
    cipher: XChaCha20Poly1305,
    seen: HashSet<[u8; NONCE_LEN]>,
}

impl Opener {
    pub fn new(key: &[u8; 32]) -> Self {
        Opener {
            cipher: XChaCha20Poly1305::new(key.into()),
            seen: HashSet::new(),
        }
    }

    pub fn open(&mut self, ciphertext: &[u8], aad: &[u8]) -> Result<Vec<u8>> {
        if ciphertext.len() < NONCE_LEN + TAG_LEN {
            return Err(Error::Crypto("ciphertext too short".into()));
        }
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(&ciphertext[..NONCE_LEN]);
        if self.seen.contains(&nonce) {
            return Err(Error::Crypto("nonce reuse".into()));
        }
        let tag = Tag::from_slice(&ciphertext[NONCE_LEN..NONCE_LEN + TAG_LEN]);
        let mut buf = ciphertext[NONCE_LEN + TAG_LEN..].to_vec();
        self.cipher
            .decrypt_in_place_detached(XNonce::from_slice(&nonce), aad, &mut buf, tag)
            .map_err(|_| Error::Crypto("authentication failed".into()))?;
        self.seen.insert(nonce);
        Ok(buf)
    }
}

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Crypto("plaintext is not a whole number of f64s".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Encrypts a flat block of embedding values.
pub fn seal_embeddings(values: &[f64], sealer: &mut Sealer, aad: &[u8]) -> Result<Vec<u8>> {
    sealer.seal(&encode_f64s(values), aad)
}

pub fn open_embeddings(ciphertext: &[u8], opener: &mut Opener, aad: &[u8]) -> Result<Vec<f64>> {
    decode_f64s(&opener.open(ciphertext, aad)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEY: [u8; 32] = [7; 32];

    #[test]
    fn round_trip_and_fresh_nonces() {
        let mut s = Sealer::new(&KEY, "ac:1");
        let mut o = Opener::new(&KEY);
        let v = [1.5, -0.25, f64::MIN_POSITIVE];
        let a = seal_embeddings(&v, &mut s, b"q1").unwrap();
        let b = seal_embeddings(&v, &mut s, b"q1").unwrap();
        assert_ne!(a, b);
        assert_eq!(a.len(), NONCE_LEN + TAG_LEN + 24);
        assert_eq!(open_embeddings(&a, &mut o, b"q1").unwrap(), v);
        assert_eq!(open_embeddings(&b, &mut o, b"q1").unwrap(), v);
    }

    #[test]
    fn tamper_and_replay_rejected() {
        let mut s = Sealer::new(&KEY, "ac:1");
        let mut o = Opener::new(&KEY);
        let c = s.seal(b"hello", b"").unwrap();
        let mut bad = c.clone();
        bad[NONCE_LEN + TAG_LEN] ^= 1;
        assert!(o.open(&bad, b"").is_err());
        assert!(o.open(&c, b"other").is_err());
        assert_eq!(o.open(&c, b"").unwrap(), b"hello");
        assert!(matches!(o.open(&c, b""), Err(Error::Crypto(m)) if m.contains("reuse")));
    }
}
