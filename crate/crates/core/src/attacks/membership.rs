//! Membership inference with shadow models: train look-alike models on data
//! whose membership the attacker knows, learn how member scores differ from
//! non-member scores, then apply that to the real target.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AttackKind, AttackReport};
use crate::error::{Error, Result};
use crate::harness::roc_auc;
use crate::matrix::Matrix;
use crate::models::{classifier_train, ClassifierConfig, ClassifierKind};
use crate::privacy::{add_gaussian_noise, normalize_standard, NoiseSpec};
use crate::seed;

#[derive(Debug, Clone, Copy)]
pub struct LabeledRows<'a> {
    pub x: &'a Matrix,
    pub y: &'a [u8],
}

impl LabeledRows<'_> {
    fn check(&self, what: &str) -> Result<()> {
        if self.x.rows() != self.y.len() {
            return Err(Error::invalid(format!("{what}: {} rows but {} labels", self.x.rows(), self.y.len())));
        }
        Ok(())
    }
}

/// How the attacker imitates the target's training recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MembershipSpec {
    pub shadow: ClassifierConfig,
    /// Noise variance the shadow adds to its training rows.
    pub shadow_noise: f64,
    pub shadows: usize,
    pub seed: u64,
}

impl Default for MembershipSpec {
    fn default() -> Self {
        MembershipSpec {
            shadow: ClassifierConfig::for_kind(ClassifierKind::Mlp),
            shadow_noise: 0.0,
            shadows: 1,
            seed: 0,
        }
    }
}

/// Features of one query: confidence in the true label, distance from the
/// decision boundary, and the log-loss.
fn attack_features(p: f64, y: u8) -> [f64; 3] {
    let pt = if y == 1 { p } else { 1.0 - p };
    [pt, (p - 0.5).abs() * 2.0, -pt.max(1e-12).ln()]
}

fn features_of(score: &dyn Fn(&[f64]) -> f64, rows: LabeledRows<'_>) -> Vec<[f64; 3]> {
    rows.x
        .iter_rows()
        .zip(rows.y)
        .map(|(r, &y)| attack_features(score(r), y))
        .collect()
}

/// Returns a report with the attack's ROC AUC at telling `members` from
/// `non_members` of the target, using `attacker` rows to train the shadows.
pub fn membership_inference(
    target: &dyn Fn(&[f64]) -> f64,
    members: LabeledRows<'_>,
    non_members: LabeledRows<'_>,
    attacker: LabeledRows<'_>,
    spec: &MembershipSpec,
) -> Result<AttackReport> {
    members.check("members")?;
    non_members.check("non-members")?;
    attacker.check("attacker data")?;
    if members.x.rows() == 0 || non_members.x.rows() == 0 {
        return Err(Error::invalid("need at least one member and one non-member"));
    }
    let mut by_class: [Vec<usize>; 2] = [vec![], vec![]];
    for (i, &y) in attacker.y.iter().enumerate() {
        by_class[usize::from(y == 1)].push(i);
    }
    if by_class.iter().any(|c| c.len() < 4) {
        return Err(Error::invalid("attacker data needs at least 4 rows per class"));
    }
    if spec.shadows == 0 {
        return Err(Error::config("at least one shadow model is required"));
    }

    let mut feats: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    for s in 0..spec.shadows {
        let mut rng = seed::rng(seed::derive_n(spec.seed, "shadow-split", s as u64));
        let (mut inside, mut outside) = (Vec::new(), Vec::new());
        for class in &by_class {
            let mut c = class.clone();
            c.shuffle(&mut rng);
            let half = c.len() / 2;
            inside.extend_from_slice(&c[..half]);
            outside.extend_from_slice(&c[half..]);
        }
        inside.sort_unstable();
        outside.sort_unstable();
        let x_in = attacker.x.select_rows(&inside);
        let y_in: Vec<u8> = inside.iter().map(|&i| attacker.y[i]).collect();
        let noisy = add_gaussian_noise(
            &x_in,
            &NoiseSpec::new(spec.shadow_noise, seed::derive_n(spec.seed, "shadow-noise", s as u64))?,
        )?;
        let cfg = spec
            .shadow
            .clone()
            .with_seed(seed::derive_n(spec.seed, "shadow-model", s as u64));
        let shadow = classifier_train(&noisy, &y_in, None, &cfg)?;
        let score = |r: &[f64]| shadow.predict(r).unwrap_or(0.5);
        for (rows, member) in [(&inside, 1u8), (&outside, 0u8)] {
            for &i in rows.iter() {
                feats.push(attack_features(score(attacker.x.row(i)), attacker.y[i]).to_vec());
                labels.push(member);
            }
        }
    }

    let fx = Matrix::from_rows(&feats)?;
    let (fx_norm, stats) = normalize_standard(&fx)?;
    let attack_cfg = ClassifierConfig {
        train: crate::models::TrainSpec {
            epochs: 200,
            learning_rate: 0.5,
            batch_size: 64,
            seed: seed::derive(spec.seed, "attack-model"),
        },
        ..ClassifierConfig::for_kind(ClassifierKind::LogReg)
    };
    let attack = classifier_train(&fx_norm, &labels, None, &attack_cfg)?;

    let mut scores = Vec::new();
    let mut truth = Vec::new();
    for (rows, member) in [(members, 1u8), (non_members, 0u8)] {
        for f in features_of(target, rows) {
            let mut f = f.to_vec();
            stats.apply_row(&mut f);
            scores.push(attack.predict(&f)?);
            truth.push(member);
        }
    }
    let auc = roc_auc(&scores, &truth)?;
    let correct = scores
        .iter()
        .zip(&truth)
        .filter(|(s, &t)| u8::from(**s >= 0.5) == t)
        .count();
    Ok(AttackReport::new(AttackKind::Membership, spec, spec.seed)
        .with("auc", auc)
        .with("accuracy", correct as f64 / truth.len() as f64)
        .with("members", members.x.rows() as f64)
        .with("non_members", non_members.x.rows() as f64))
}
