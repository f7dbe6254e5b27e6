mod common;

use rand::Rng;

use hyfl::models::{
    classifier_train, train_gbdt, AeTrainer, Autoencoder, Classifier, ClassifierConfig, ClassifierKind, Gbdt,
    GbdtConfig, LinearLoss, LinearModel, SavedModel, TrainSpec,
};
use hyfl::Matrix;

use common::{random_matrix, rng};

/// Two noisy Gaussian blobs.
fn blobs(n: usize, d: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut r = rng(seed);
    let mut x = Matrix::zeros(0, d);
    let mut y = Vec::new();
    for i in 0..n {
        let label = u8::from(i % 3 == 0);
        let shift = if label == 1 { 0.8 } else { -0.4 };
        let row: Vec<f64> = (0..d).map(|_| shift + r.random_range(-1.5..1.5)).collect();
        x.push_row(&row).unwrap();
        y.push(label);
    }
    (x, y)
}

fn logloss(model: &Gbdt, x: &Matrix, y: &[f64]) -> f64 {
    x.iter_rows()
        .zip(y)
        .map(|(row, &t)| {
            let p = model.score(row).clamp(1e-15, 1.0 - 1e-15);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / y.len() as f64
}

#[test]
fn boosting_never_raises_training_loss() {
    let (x, labels) = blobs(300, 4, 1);
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let model = train_gbdt(&x, &y, None, &GbdtConfig::default());
    assert!(!model.trees.is_empty());
    let mut prev = f64::INFINITY;
    for k in 0..=model.trees.len() {
        let prefix = Gbdt {
            trees: model.trees[..k].to_vec(),
            ..model.clone()
        };
        let loss = logloss(&prefix, &x, &y);
        assert!(loss <= prev + 1e-12, "loss rose at tree {k}: {prev} -> {loss}");
        prev = loss;
    }
    assert!(prev < 0.6);
}

#[test]
fn integer_weights_match_duplicated_rows() {
    let (x, labels) = blobs(120, 3, 2);
    let mut r = rng(3);
    let w: Vec<f64> = (0..labels.len()).map(|_| r.random_range(1..4) as f64).collect();
    let mut dup = Matrix::zeros(0, 3);
    let mut dup_y = Vec::new();
    for (i, &wi) in w.iter().enumerate() {
        for _ in 0..wi as usize {
            dup.push_row(x.row(i)).unwrap();
            dup_y.push(labels[i]);
        }
    }
    let probe = random_matrix(&mut r, 50, 3, 2.0);

    let cfg = ClassifierConfig {
        gbdt: GbdtConfig {
            rounds: 10,
            ..Default::default()
        },
        ..ClassifierConfig::for_kind(ClassifierKind::Gbdt)
    };
    let a = classifier_train(&x, &labels, Some(&w), &cfg).unwrap();
    let b = classifier_train(&dup, &dup_y, None, &cfg).unwrap();
    for row in probe.iter_rows() {
        assert!((a.predict(row).unwrap() - b.predict(row).unwrap()).abs() < 1e-9);
    }

    // The linear objective is a weighted mean, so the two are the same function.
    let mut lr = LinearModel::zeros(3, LinearLoss::Logistic);
    lr.set_params(&[0.3, -0.2, 0.5, 0.1]).unwrap();
    let yf: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let dyf: Vec<f64> = dup_y.iter().map(|&l| f64::from(l)).collect();
    let (la, ga) = lr.loss_gradient(&x, &yf, Some(&w)).unwrap();
    let (lb, gb) = lr.loss_gradient(&dup, &dyf, None).unwrap();
    assert!((la - lb).abs() < 1e-12);
    assert!(common::rel_err(&ga, &gb) < 1e-12);
}

#[test]
fn every_kind_learns_and_round_trips() {
    let (x, y) = blobs(400, 5, 4);
    let dir = tempfile::tempdir().unwrap();
    for kind in ClassifierKind::ALL {
        let model = classifier_train(&x, &y, None, &ClassifierConfig::for_kind(kind).with_seed(7)).unwrap();
        assert_eq!(model.kind(), kind);
        assert_eq!(model.input_dim(), 5);
        let scores = model.predict_batch(&x).unwrap();
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
        let auc = hyfl::harness::roc_auc(&scores, &y).unwrap();
        assert!(auc > 0.75, "{kind}: auc {auc}");

        let path = dir.path().join(format!("{kind}.json"));
        SavedModel::Classifier(model.clone()).save(&path).unwrap();
        match SavedModel::load(&path).unwrap() {
            SavedModel::Classifier(back) => {
                assert_eq!(back, model);
                assert_eq!(back.predict_batch(&x).unwrap(), scores);
            }
            other => panic!("loaded {other:?}"),
        }
    }
}

#[test]
fn training_is_seed_deterministic() {
    let (x, y) = blobs(200, 4, 5);
    for kind in ClassifierKind::ALL {
        let cfg = ClassifierConfig::for_kind(kind).with_seed(3);
        let a = classifier_train(&x, &y, None, &cfg).unwrap();
        let b = classifier_train(&x, &y, None, &cfg).unwrap();
        assert_eq!(a, b, "{kind}");
    }
}

#[test]
fn bad_training_inputs_are_rejected() {
    let (x, y) = blobs(30, 2, 6);
    let cfg = ClassifierConfig::default();
    assert!(classifier_train(&x, &vec![0; 30], None, &cfg).is_err());
    assert!(classifier_train(&x, &y[..29], None, &cfg).is_err());
    assert!(classifier_train(&x, &y, Some(&[1.0; 3]), &cfg).is_err());
    let mut bad = x.clone();
    bad.set(0, 0, f64::NAN);
    assert!(classifier_train(&bad, &y, None, &cfg).is_err());
}

#[test]
fn differentiable_kinds_expose_input_gradients() {
    let (x, y) = blobs(100, 3, 7);
    for kind in ClassifierKind::ALL {
        let model = classifier_train(&x, &y, None, &ClassifierConfig::for_kind(kind)).unwrap();
        let grad = model.input_gradient(x.row(0), 1.0);
        assert_eq!(grad.is_some(), model.is_differentiable(), "{kind}");
        assert_eq!(matches!(model, Classifier::Gbdt(_)), !model.is_differentiable());
    }
}

#[test]
fn autoencoder_training_reduces_reconstruction_error() {
    let mut r = rng(8);
    // Low-rank inputs an 8 → 3 bottleneck can represent.
    let basis = random_matrix(&mut r, 3, 8, 1.0);
    let mut x = Matrix::zeros(0, 8);
    for _ in 0..200 {
        let c: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        let row: Vec<f64> = (0..8).map(|j| (0..3).map(|k| c[k] * basis.get(k, j)).sum()).collect();
        x.push_row(&row).unwrap();
    }
    let mut ae = Autoencoder::new(8, 6, 3, 1);
    let before = ae.loss(&x);
    let mut trainer = AeTrainer::new(TrainSpec {
        epochs: 0,
        learning_rate: 0.05,
        batch_size: 32,
        seed: 2,
    })
    .unwrap();
    let losses = trainer.train(&mut ae, &x, 60).unwrap();
    // Initial loss, then one per epoch.
    assert_eq!(losses.len(), 61);
    assert_eq!(losses[0], before);
    assert_eq!(trainer.epochs_done(), 60);
    assert!(ae.loss(&x) < 0.3 * before, "{before} -> {}", ae.loss(&x));
    assert_eq!(ae.encode(x.row(0)).unwrap().len(), 3);

    let text = SavedModel::Autoencoder(ae.clone()).to_json().unwrap();
    assert_eq!(SavedModel::from_json(&text).unwrap(), SavedModel::Autoencoder(ae));
}
