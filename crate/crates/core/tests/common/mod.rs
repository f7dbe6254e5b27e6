//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use hyfl::privacy::{Identity, KeyMaterial};
use hyfl::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Precision–recall area by direct counting: for every distinct score `t`,
/// from high to low, classify `score >= t` as positive and recount.
pub fn brute_aucpr(scores: &[f64], labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut predicted = 0.0;
        for (s, l) in scores.iter().zip(labels) {
            if *s >= t {
                predicted += 1.0;
                if *l == 1 {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / pos;
        area += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    area
}

/// Central-difference gradient of `f` at `p`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, p: &[f64], h: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    (0..p.len())
        .map(|i| {
            q[i] = p[i] + h;
            let up = f(&q);
            q[i] = p[i] - h;
            let down = f(&q);
            q[i] = p[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute gap when both are tiny.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    d / (norm(a) * norm(b))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Largest z-score of the per-position sample mean of `u64` words (as
/// fractions of 2^64) against Uniform[0, 1), whose variance is 1/12.
pub fn max_uniform_z(samples: &[Vec<u64>]) -> f64 {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    let sd = (1.0 / 12.0 / n).sqrt();
    (0..dim)
        .map(|j| {
            let mean = samples.iter().map(|s| s[j] as f64 / 18446744073709551616.0).sum::<f64>() / n;
            ((mean - 0.5) / sd).abs()
        })
        .fold(0.0, f64::max)
}

/// Mask seeds for clients `1..=m` from a real pairwise handshake.
pub fn clique_keys(m: u32, seed: u64) -> Vec<KeyMaterial> {
    let ids: Vec<Identity> = (1..=m)
        .map(|i| Identity::from_seed(format!("ac:{i}"), seed.wrapping_mul(1000).wrapping_add(i as u64)))
        .collect();
    let mut keys = vec![KeyMaterial::default(); m as usize];
    for a in 0..m as usize {
        for b in 0..m as usize {
            if a != b {
                let s = ids[a]
                    .agree(ids[b].name(), &ids[b].static_public(), &ids[b].ephemeral_public(), "mask")
                    .unwrap();
                keys[a].insert_mask_peer(b as u32 + 1, s);
            }
        }
    }
    keys
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
