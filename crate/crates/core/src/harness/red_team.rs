//! Ready-made attack scenarios on pipeline artefacts: an account client's
//! first local update, the transaction client's classifier and the
//! embeddings it receives.

use serde::{Deserialize, Serialize};

use super::experiment::{join_locally, train_autoencoder_centrally, ExperimentConfig};
use crate::attacks::{
    attribute_inference, feature_leakage_probe, gradient_inversion, membership_inference, observed_gradient,
    AttackKind, AttackReport, AttributeBudget, InversionProblem, LabeledRows, LeakageSpec, MembershipSpec, ParamScope,
};
use crate::data::{generate, Dataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{classifier_train, Autoencoder, ClassifierConfig, ClassifierKind, TrainSpec};
use crate::privacy::{add_gaussian_noise, normalize_standard, NoiseSpec};
use crate::seed;

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionScenario {
    /// Step size of the victim's local SGD step; the update it sends is
    /// `-learning_rate * gradient`.
    pub learning_rate: f64,
    /// Variance of Gaussian noise the client adds to its update.
    pub noise_var: f64,
    pub steps: usize,
    pub step_size: f64,
    pub scope: ParamScope,
    pub seed: u64,
}

impl Default for InversionScenario {
    fn default() -> Self {
        InversionScenario {
            learning_rate: crate::models::AeConfig::default().train.learning_rate,
            noise_var: 0.0,
            steps: 2000,
            step_size: 0.01,
            scope: ParamScope::Full,
            seed: 0,
        }
    }
}

/// Inverts the update a client sends after one SGD step on `secret` alone.
/// The attacker flips the update's sign to get a gradient direction; the
/// step size itself does not matter to a cosine objective, but it sets the
/// signal-to-noise ratio once the client perturbs the update.
pub fn invert_update(model: &Autoencoder, secret: &[f64], sc: &InversionScenario) -> Result<AttackReport> {
    if !(sc.learning_rate > 0.0) {
        return Err(Error::config("victim learning rate must be positive"));
    }
    let batch = Matrix::from_rows(&[secret])?;
    let step: Vec<f64> = observed_gradient(model, &batch)?
        .iter()
        .map(|g| -sc.learning_rate * g)
        .collect();
    let update = Matrix::from_vec(1, step.len(), step)?;
    let sent = add_gaussian_noise(&update, &NoiseSpec::new(sc.noise_var, seed::derive(sc.seed, "update-noise"))?)?;
    let observed: Vec<f64> = sent.as_slice().iter().map(|u| -u).collect();
    let problem = InversionProblem {
        scope: sc.scope,
        steps: sc.steps,
        step_size: sc.step_size,
        ..InversionProblem::new(model.clone(), observed, sc.seed)
    };
    let res = gradient_inversion(&problem)?;
    let l2: f64 = res
        .recovered
        .iter()
        .zip(secret)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(AttackReport::new(AttackKind::Inversion, sc, sc.seed)
        .with("objective_cos", res.best_objective.clamp(-1.0, 1.0))
        .with("input_cos", cosine(&res.recovered, secret))
        .with("input_l2", l2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MembershipScenario {
    /// Rows per class in each of the member, non-member and attacker sets.
    pub per_class: usize,
    /// Noise variance on the target's training rows.
    pub noise_var: f64,
    pub target: ClassifierConfig,
    pub seed: u64,
}

impl Default for MembershipScenario {
    fn default() -> Self {
        MembershipScenario {
            per_class: 30,
            noise_var: 0.0,
            // Small, deep and long-trained: built to memorise.
            target: ClassifierConfig {
                hidden: vec![64, 64],
                l2: 0.0,
                train: TrainSpec {
                    epochs: 500,
                    learning_rate: 0.1,
                    batch_size: 32,
                    seed: 0,
                },
                ..ClassifierConfig::for_kind(ClassifierKind::Mlp)
            },
            seed: 0,
        }
    }
}

/// Draws disjoint member, non-member and attacker sets from `rows` (balanced
/// per class), trains an overfit-prone target on the members and attacks it
/// with a shadow model that copies the target's recipe.
pub fn membership_on(rows: &Matrix, labels: &[u8], sc: &MembershipScenario) -> Result<AttackReport> {
    use rand::seq::SliceRandom;
    let mut rng = seed::rng(seed::derive(sc.seed, "membership-pools"));
    let mut sets: [Vec<usize>; 3] = Default::default();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 3 * sc.per_class {
            return Err(Error::invalid(format!(
                "membership scenario needs {} rows of class {class}, have {}",
                3 * sc.per_class,
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (k, set) in sets.iter_mut().enumerate() {
            set.extend_from_slice(&idx[k * sc.per_class..(k + 1) * sc.per_class]);
        }
    }
    let (normed, _) = normalize_standard(rows)?;
    let pick = |set: &[usize]| (normed.select_rows(set), set.iter().map(|&i| labels[i]).collect::<Vec<u8>>());
    let (mx, my) = pick(&sets[0]);
    let (nx, ny) = pick(&sets[1]);
    let (ax, ay) = pick(&sets[2]);

    let noisy = add_gaussian_noise(&mx, &NoiseSpec::new(sc.noise_var, seed::derive(sc.seed, "target-noise"))?)?;
    let target_cfg = sc.target.clone().with_seed(seed::derive(sc.seed, "target"));
    let target = classifier_train(&noisy, &my, None, &target_cfg)?;
    let score = |r: &[f64]| target.predict(r).unwrap_or(0.5);
    let spec = MembershipSpec {
        shadow: sc.target.clone(),
        shadow_noise: sc.noise_var,
        shadows: 1,
        seed: seed::derive(sc.seed, "shadow"),
    };
    let report = membership_inference(
        &score,
        LabeledRows { x: &mx, y: &my },
        LabeledRows { x: &nx, y: &ny },
        LabeledRows { x: &ax, y: &ay },
        &spec,
    )?;
    Ok(report.with("noise_var", sc.noise_var))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeScenario {
    /// Column hidden from the attacker.
    pub column: usize,
    pub rows: usize,
    pub budget: AttributeBudget,
    pub seed: u64,
}

impl Default for AttributeScenario {
    fn default() -> Self {
        AttributeScenario {
            column: 0,
            rows: 200,
            budget: AttributeBudget::default(),
            seed: 0,
        }
    }
}

/// Trains a logistic-regression target on standardised rows, hides one
/// column of positive training rows and completes it from the model.
/// Reports the error against a guess of the column mean and how often the
/// completion lands on the right side of it.
pub fn attribute_on(rows: &Matrix, labels: &[u8], sc: &AttributeScenario) -> Result<AttackReport> {
    if sc.column >= rows.cols() {
        return Err(Error::invalid(format!("column {} out of range", sc.column)));
    }
    let (normed, _) = normalize_standard(rows)?;
    let cfg = ClassifierConfig {
        train: TrainSpec {
            seed: seed::derive(sc.seed, "attribute-target"),
            ..ClassifierConfig::for_kind(ClassifierKind::LogReg).train
        },
        ..ClassifierConfig::for_kind(ClassifierKind::LogReg)
    };
    let model = classifier_train(&normed, labels, None, &cfg)?;
    let victims: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).take(sc.rows).collect();
    if victims.is_empty() {
        return Err(Error::invalid("no positive rows to attack"));
    }
    let (mut err, mut base, mut hits) = (0.0, 0.0, 0usize);
    for &i in &victims {
        let truth = normed.row(i);
        let mut partial = truth.to_vec();
        partial[sc.column] = 0.0;
        let c = attribute_inference(&model, &partial, &[sc.column], 1, &sc.budget)?;
        let (got, want) = (c.row[sc.column], truth[sc.column]);
        err += (got - want).abs();
        base += want.abs();
        if (got > 0.0) == (want > 0.0) {
            hits += 1;
        }
    }
    let n = victims.len() as f64;
    Ok(AttackReport::new(AttackKind::Attribute, sc, sc.seed)
        .with("mae", err / n)
        .with("baseline_mae", base / n)
        .with("sign_accuracy", hits as f64 / n))
}

/// Embeds every account with `ae` and probes how well flags can be read
/// back from the embeddings.
pub fn leakage_on(ds: &Dataset, ae: &Autoencoder, spec: &LeakageSpec) -> Result<AttackReport> {
    let mut emb = Matrix::zeros(0, ae.latent_dim());
    let mut flags = Vec::with_capacity(ds.accounts.len());
    for a in ds.accounts.values() {
        emb.push_row(&ae.encode(&a.flag.encode())?)?;
        flags.push(a.flag.value());
    }
    feature_leakage_probe(&emb, &flags, spec)
}

/// Shared artefacts for the scenarios: data, a trained encoder and a sample
/// of joined training rows.
struct Stage {
    dataset: Dataset,
    autoencoder: Autoencoder,
    joined: Matrix,
    labels: Vec<u8>,
}

fn stage(config: &ExperimentConfig) -> Result<Stage> {
    config.validate()?;
    let dataset = generate(&config.data)?;
    let autoencoder = train_autoencoder_centrally(&dataset, &config.protocol())?;
    let joined = join_locally(&dataset, &autoencoder, &dataset.train)?;
    let labels = dataset.labels(&dataset.train);
    Ok(Stage {
        dataset,
        autoencoder,
        joined,
        labels,
    })
}

fn run_on(kind: AttackKind, st: &Stage, config: &ExperimentConfig) -> Result<AttackReport> {
    let seed = seed::derive(config.seed, &format!("attack/{kind}"));
    match kind {
        AttackKind::Inversion => {
            // The update an account client would send after one step from the
            // initial global model, on one high-risk account.
            let init = Autoencoder::from_config(&config.autoencoder, config.protocol().init_seed());
            let secret = st
                .dataset
                .accounts
                .values()
                .find(|a| a.flag.is_high_risk())
                .unwrap_or_else(|| st.dataset.accounts.values().next().expect("accounts"))
                .flag
                .encode();
            let sc = InversionScenario {
                seed,
                ..Default::default()
            };
            invert_update(&init, &secret, &sc)
        }
        AttackKind::Membership => membership_on(
            &st.joined,
            &st.labels,
            &MembershipScenario {
                noise_var: config.noise_var,
                seed,
                ..Default::default()
            },
        ),
        AttackKind::Attribute => attribute_on(
            &st.joined,
            &st.labels,
            &AttributeScenario {
                column: 2 * st.autoencoder.latent_dim(),
                seed,
                ..Default::default()
            },
        ),
        AttackKind::Leakage => leakage_on(
            &st.dataset,
            &st.autoencoder,
            &LeakageSpec {
                seed,
                ..Default::default()
            },
        ),
    }
}

pub fn run_attack(kind: AttackKind, config: &ExperimentConfig) -> Result<AttackReport> {
    run_on(kind, &stage(config)?, config)
}

/// All four attacks with default scenarios on the data `config` describes.
pub fn attack_suite(config: &ExperimentConfig) -> Result<Vec<AttackReport>> {
    let st = stage(config)?;
    AttackKind::ALL
        .into_iter()
        .map(|k| run_on(k, &st, config))
        .collect()
}
