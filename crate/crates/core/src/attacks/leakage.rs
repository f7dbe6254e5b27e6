//! Feature leakage: how much of an account's flag a third party can recover
//! from its embedding, given a few labelled examples.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AttackKind, AttackReport};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LeakageSpec {
    /// Share of the pairs the attacker holds labels for.
    pub aux_fraction: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for LeakageSpec {
    fn default() -> Self {
        LeakageSpec {
            aux_fraction: 0.2,
            k: 5,
            seed: 0,
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Trains a k-nearest-neighbour flag predictor on an auxiliary share of
/// `(embedding, flag)` pairs and reports its accuracy on the rest, next to
/// uniform and prior-matched chance levels.
pub fn feature_leakage_probe(embeddings: &Matrix, flags: &[u8], spec: &LeakageSpec) -> Result<AttackReport> {
    if embeddings.rows() != flags.len() {
        return Err(Error::invalid("one flag per embedding required"));
    }
    if !(spec.aux_fraction > 0.0 && spec.aux_fraction < 1.0) || spec.k == 0 {
        return Err(Error::config("aux_fraction must lie in (0, 1) and k >= 1"));
    }
    let mut order: Vec<usize> = (0..flags.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(spec.seed, "leakage-split")));
    let n_aux = (flags.len() as f64 * spec.aux_fraction).round() as usize;
    let (aux, eval) = order.split_at(n_aux);
    let classes: std::collections::BTreeSet<u8> = flags.iter().copied().collect();
    if aux.len() < classes.len() || eval.is_empty() {
        return Err(Error::invalid(format!(
            "auxiliary set of {} is smaller than the {} flag classes present",
            aux.len(),
            classes.len()
        )));
    }
    let mut prior = [0usize; 256];
    for &i in aux {
        prior[flags[i] as usize] += 1;
    }
    let k = spec.k.min(aux.len());
    let mut correct = 0usize;
    let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(aux.len());
    for &i in eval {
        let q = embeddings.row(i);
        nearest.clear();
        nearest.extend(aux.iter().map(|&a| (dist2(q, embeddings.row(a)), a)));
        nearest.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = [0usize; 256];
        for &(_, a) in &nearest[..k] {
            votes[flags[a] as usize] += 1;
        }
        // Ties go to the flag more common in the auxiliary set, then the lower flag.
        let pred = (0..256)
            .max_by(|&a, &b| votes[a].cmp(&votes[b]).then(prior[a].cmp(&prior[b])).then(b.cmp(&a)))
            .expect("nonempty");
        if pred == flags[i] as usize {
            correct += 1;
        }
    }
    let mut eval_freq = [0usize; 256];
    for &i in eval {
        eval_freq[flags[i] as usize] += 1;
    }
    let prior_chance: f64 = (0..256)
        .map(|c| prior[c] as f64 / aux.len() as f64 * eval_freq[c] as f64 / eval.len() as f64)
        .sum();
    Ok(AttackReport::new(AttackKind::Leakage, spec, spec.seed)
        .with("accuracy", correct as f64 / eval.len() as f64)
        .with("chance_uniform", 1.0 / f64::from(crate::data::MAX_FLAG + 1))
        .with("chance_prior", prior_chance)
        .with("aux_rows", aux.len() as f64)
        .with("eval_rows", eval.len() as f64))
}
