//! Pairwise additive masking so the server learns only the sum of updates.
//!
//! Parameters are encoded as two's-complement fixed point with 20 fractional
//! bits and summed modulo 2^64. Client `i` adds `PRG(s_ij)` for every peer
//! `j > i` and subtracts it for every `j < i`; over the full set of clients
//! the masks cancel exactly.

use std::collections::BTreeSet;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::keys::KeyMaterial;
use crate::error::{Error, Result};

pub const FRAC_BITS: u32 = 20;
const SCALE: f64 = (1u64 << FRAC_BITS) as f64;
/// Largest magnitude that survives encoding and summation over many clients.
const MAX_ABS: f64 = (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedUpdate {
    pub client_id: u32,
    pub round: u64,
    pub values: Vec<u64>,
}

pub fn quantize(x: f64) -> Result<u64> {
    if !x.is_finite() || x.abs() >= MAX_ABS {
        return Err(Error::NonFinite("fixed-point encoding input"));
    }
    Ok((x * SCALE).round() as i64 as u64)
}

pub fn dequantize(v: u64) -> f64 {
    v as i64 as f64 / SCALE
}

fn mask_stream(seed: &[u8; 32], round: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(*seed);
    rng.set_stream(round);
    rng
}

/// Encodes and masks `params` for `round`. Peers are whatever mask seeds the
/// key material holds; the server must receive an update from each of them.
pub fn mask_update(params: &[f64], client_id: u32, keys: &KeyMaterial, round: u64) -> Result<MaskedUpdate> {
    let mut values = params.iter().map(|&x| quantize(x)).collect::<Result<Vec<_>>>()?;
    for (&peer, seed) in &keys.mask {
        if peer == client_id {
            return Err(Error::Crypto("mask seed shared with oneself".into()));
        }
        let mut rng = mask_stream(seed, round);
        let add = peer > client_id;
        for v in values.iter_mut() {
            let m = rng.next_u64();
            *v = if add { v.wrapping_add(m) } else { v.wrapping_sub(m) };
        }
    }
    Ok(MaskedUpdate {
        client_id,
        round,
        values,
    })
}

/// Sums masked updates and decodes the result. Only meaningful when every
/// client of the round is present; otherwise the residual masks remain.
pub fn unmask_sum(updates: &[MaskedUpdate]) -> Result<Vec<f64>> {
    let first = updates
        .first()
        .ok_or_else(|| Error::invalid("no updates to aggregate"))?;
    let mut ids = BTreeSet::new();
    let mut acc = vec![0u64; first.values.len()];
    for u in updates {
        if u.values.len() != acc.len() {
            return Err(Error::DimMismatch {
                expected: acc.len(),
                got: u.values.len(),
            });
        }
        if u.round != first.round {
            return Err(Error::protocol(format!(
                "update from client {} is for round {}, expected {}",
                u.client_id, u.round, first.round
            )));
        }
        if !ids.insert(u.client_id) {
            return Err(Error::protocol(format!("duplicate update from client {}", u.client_id)));
        }
        for (a, v) in acc.iter_mut().zip(&u.values) {
            *a = a.wrapping_add(*v);
        }
    }
    Ok(acc.into_iter().map(dequantize).collect())
}
