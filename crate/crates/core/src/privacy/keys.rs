//! Authenticated key agreement between protocol nodes.
//!
//! Every node owns a long-term X25519 identity whose public half is known to
//! its peers ahead of time. At session start it publishes a fresh ephemeral
//! share; a pair secret mixes the ephemeral–ephemeral and static–static
//! exchanges through HKDF-SHA256, so only holders of both static keys can
//! derive it.

use std::collections::BTreeMap;

use hkdf::Hkdf;
use rand::RngCore;
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::error::{Error, Result};
use crate::seed;

pub const KEY_LEN: usize = 32;

pub type PublicShare = [u8; 32];

#[derive(Clone)]
pub struct Identity {
    name: String,
    static_secret: StaticSecret,
    ephemeral: StaticSecret,
}

impl std::fmt::Debug for Identity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Identity").field("name", &self.name).finish_non_exhaustive()
    }
}

fn secret_from(seed: u64) -> StaticSecret {
    let mut bytes = [0u8; 32];
    seed::rng(seed).fill_bytes(&mut bytes);
    StaticSecret::from(bytes)
}

impl Identity {
    /// Deterministic identity for simulations; `seed` should be unique per node.
    pub fn from_seed(name: impl Into<String>, seed: u64) -> Self {
        Identity {
            name: name.into(),
            static_secret: secret_from(seed::derive(seed, "static")),
            ephemeral: secret_from(seed::derive(seed, "ephemeral")),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn static_public(&self) -> PublicShare {
        PublicKey::from(&self.static_secret).to_bytes()
    }

    pub fn ephemeral_public(&self) -> PublicShare {
        PublicKey::from(&self.ephemeral).to_bytes()
    }

    /// Derives the secret shared with `peer` for `purpose`.
    pub fn agree(
        &self,
        peer: &str,
        peer_static: &PublicShare,
        peer_ephemeral: &PublicShare,
        purpose: &str,
    ) -> Result<[u8; KEY_LEN]> {
        if peer == self.name {
            return Err(Error::Crypto("cannot agree a key with oneself".into()));
        }
        let ee = self.ephemeral.diffie_hellman(&PublicKey::from(*peer_ephemeral));
        let ss = self.static_secret.diffie_hellman(&PublicKey::from(*peer_static));
        if !ee.was_contributory() || !ss.was_contributory() {
            return Err(Error::Crypto(format!("low-order share from {peer}")));
        }
        let mut ikm = [0u8; 64];
        ikm[..32].copy_from_slice(ee.as_bytes());
        ikm[32..].copy_from_slice(ss.as_bytes());
        // Salt binds both names and both ephemeral shares, in a fixed order.
        let (a, b, ea, eb) = if self.name.as_str() < peer {
            (self.name.as_str(), peer, self.ephemeral_public(), *peer_ephemeral)
        } else {
            (peer, self.name.as_str(), *peer_ephemeral, self.ephemeral_public())
        };
        let mut salt = Vec::new();
        for part in [a.as_bytes(), b.as_bytes()] {
            salt.extend_from_slice(&(part.len() as u32).to_be_bytes());
            salt.extend_from_slice(part);
        }
        salt.extend_from_slice(&ea);
        salt.extend_from_slice(&eb);
        let hk = Hkdf::<Sha256>::new(Some(&salt), &ikm);
        let mut out = [0u8; KEY_LEN];
        hk.expand(purpose.as_bytes(), &mut out)
            .map_err(|_| Error::Crypto("hkdf expand".into()))?;
        Ok(out)
    }
}

/// What one node holds after the handshake: per-peer mask seeds for the
/// account-client clique and per-peer session keys for payload encryption.
#[derive(Clone, Default)]
pub struct KeyMaterial {
    pub(crate) mask: BTreeMap<u32, [u8; KEY_LEN]>,
    pub(crate) session: BTreeMap<String, [u8; KEY_LEN]>,
}

impl std::fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyMaterial")
            .field("mask_peers", &self.mask.keys().collect::<Vec<_>>())
            .field("session_peers", &self.session.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl KeyMaterial {
    pub fn insert_mask_peer(&mut self, client_id: u32, secret: [u8; KEY_LEN]) {
        self.mask.insert(client_id, secret);
    }

    pub fn insert_session(&mut self, peer: impl Into<String>, secret: [u8; KEY_LEN]) {
        self.session.insert(peer.into(), secret);
    }

    pub fn session(&self, peer: &str) -> Option<&[u8; KEY_LEN]> {
        self.session.get(peer)
    }

    pub fn mask_peers(&self) -> impl Iterator<Item = u32> + '_ {
        self.mask.keys().copied()
    }
}
