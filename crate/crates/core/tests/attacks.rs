mod common;

use proptest::prelude::*;
use rand::Rng;

use hyfl::attacks::{
    attribute_inference, feature_leakage_probe, gradient_inversion, membership_inference, observed_gradient,
    AttackKind, AttributeBudget, InversionProblem, LabeledRows, LeakageSpec, MembershipSpec, ParamScope,
};
use hyfl::data::Flag;
use hyfl::models::{classifier_train, Autoencoder, Classifier, ClassifierConfig, ClassifierKind, LinearLoss, LinearModel};
use hyfl::Matrix;

use common::{cosine, random_matrix, rng};

fn secret(flag: u8) -> Vec<f64> {
    Flag::new(flag).unwrap().encode().to_vec()
}

#[test]
fn inversion_started_at_the_truth_stays_there() {
    let model = Autoencoder::new(13, 8, 4, 1);
    let x = secret(9);
    let observed = observed_gradient(&model, &Matrix::from_rows(&[&x]).unwrap()).unwrap();
    let res = gradient_inversion(&InversionProblem {
        init: Some(x.clone()),
        steps: 50,
        ..InversionProblem::new(model, observed, 0)
    })
    .unwrap();
    assert!(res.best_objective > 1.0 - 1e-9);
    assert!(cosine(&res.recovered, &x) > 1.0 - 1e-6);
    assert_eq!(res.trace.len(), 51);
    assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn inversion_recovers_a_flag_encoding() {
    let model = Autoencoder::new(13, 8, 4, 2);
    let x = secret(10);
    let observed = observed_gradient(&model, &Matrix::from_rows(&[&x]).unwrap()).unwrap();
    for scope in [ParamScope::Full, ParamScope::Encoder] {
        let res = gradient_inversion(&InversionProblem {
            scope,
            ..InversionProblem::new(model.clone(), observed.clone(), 3)
        })
        .unwrap();
        assert!(res.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(res.best_objective > 0.99, "{scope:?}: {}", res.best_objective);
    }
}

#[test]
fn inversion_rejects_degenerate_targets() {
    let model = Autoencoder::new(13, 8, 4, 1);
    let n = model.param_count();
    assert!(gradient_inversion(&InversionProblem::new(model.clone(), vec![0.0; n], 0)).is_err());
    assert!(gradient_inversion(&InversionProblem::new(model.clone(), vec![1.0; n - 1], 0)).is_err());
    let bad_init = InversionProblem {
        init: Some(vec![0.0; 3]),
        ..InversionProblem::new(model, vec![1.0; n], 0)
    };
    assert!(gradient_inversion(&bad_init).is_err());
}

/// Two overlapping classes in 4 dimensions.
fn pool(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
    let mut r = rng(seed);
    let mut x = Matrix::zeros(0, 4);
    let mut y = Vec::new();
    for i in 0..n {
        let label = (i % 2) as u8;
        let c = if label == 1 { 0.5 } else { -0.5 };
        let row: Vec<f64> = (0..4).map(|_| c + r.random_range(-2.0..2.0)).collect();
        x.push_row(&row).unwrap();
        y.push(label);
    }
    (x, y)
}

fn small_shadow() -> MembershipSpec {
    let mut shadow = ClassifierConfig::for_kind(ClassifierKind::Mlp);
    shadow.hidden = vec![16];
    shadow.train.epochs = 40;
    MembershipSpec {
        shadow,
        seed: 4,
        ..Default::default()
    }
}

#[test]
fn constant_target_gives_chance_auc() {
    let (m, my) = pool(40, 1);
    let (n, ny) = pool(40, 2);
    let (a, ay) = pool(60, 3);
    let constant = |_: &[f64]| 0.5;
    let report = membership_inference(
        &constant,
        LabeledRows { x: &m, y: &my },
        LabeledRows { x: &n, y: &ny },
        LabeledRows { x: &a, y: &ay },
        &small_shadow(),
    )
    .unwrap();
    let auc = report.metric("auc").unwrap();
    assert!((0.45..=0.55).contains(&auc), "{auc}");
    report.validate().unwrap();
}

#[test]
fn swapping_members_flips_the_auc() {
    let (m, my) = pool(40, 5);
    let (n, ny) = pool(40, 6);
    let (a, ay) = pool(60, 7);
    let mut cfg = ClassifierConfig::for_kind(ClassifierKind::Mlp);
    cfg.train.epochs = 200;
    let target = classifier_train(&m, &my, None, &cfg).unwrap();
    let score = |r: &[f64]| target.predict(r).unwrap();
    let spec = small_shadow();
    let fwd = membership_inference(
        &score,
        LabeledRows { x: &m, y: &my },
        LabeledRows { x: &n, y: &ny },
        LabeledRows { x: &a, y: &ay },
        &spec,
    )
    .unwrap();
    let rev = membership_inference(
        &score,
        LabeledRows { x: &n, y: &ny },
        LabeledRows { x: &m, y: &my },
        LabeledRows { x: &a, y: &ay },
        &spec,
    )
    .unwrap();
    let (f, r) = (fwd.metric("auc").unwrap(), rev.metric("auc").unwrap());
    assert!((f + r - 1.0).abs() < 1e-12, "{f} + {r}");
    assert_eq!(fwd.metric("members"), Some(40.0));
}

#[test]
fn membership_needs_attacker_rows_of_both_classes() {
    let (m, my) = pool(10, 1);
    let (a, _) = pool(10, 2);
    let ones = vec![1u8; 10];
    let f = |_: &[f64]| 0.5;
    let err = membership_inference(
        &f,
        LabeledRows { x: &m, y: &my },
        LabeledRows { x: &m, y: &my },
        LabeledRows { x: &a, y: &ones },
        &MembershipSpec::default(),
    );
    assert!(err.is_err());
}

fn logreg(weights: Vec<f64>) -> Classifier {
    Classifier::LogReg(LinearModel {
        weights,
        bias: 0.0,
        loss: LinearLoss::Logistic,
    })
}

#[test]
fn logreg_completion_moves_toward_the_label() {
    let model = logreg(vec![2.0, -1.0, 0.5]);
    let budget = AttributeBudget::default();
    let row = [0.1, 0.2, 0.7];
    // Each missing coordinate moves in the direction of sign(w_j) for label 1
    // and against it for label 0.
    let pos = attribute_inference(&model, &row, &[0, 1], 1, &budget).unwrap();
    assert!(pos.row[0] > row[0] && pos.row[1] < row[1] && pos.row[2] == 0.7);
    let neg = attribute_inference(&model, &row, &[0, 1], 0, &budget).unwrap();
    assert!(neg.row[0] < row[0] && neg.row[1] > row[1] && neg.row[2] == 0.7);
    // The log-loss gradient fades as the sigmoid saturates; big steps reach the box.
    let wide = AttributeBudget {
        step_size: 50.0,
        ..budget.clone()
    };
    let hit = attribute_inference(&model, &row, &[0, 1], 1, &wide).unwrap();
    assert_eq!(hit.row, vec![budget.upper, budget.lower, 0.7]);
    let start = attribute_inference(&model, &row, &[], 1, &budget).unwrap();
    assert_eq!(start.row, row.to_vec());
    assert!(pos.loss < start.loss);
}

#[test]
fn tree_completion_does_not_increase_loss() {
    let (x, y) = pool(200, 9);
    let mut cfg = ClassifierConfig::for_kind(ClassifierKind::Gbdt);
    cfg.gbdt.rounds = 10;
    let model = classifier_train(&x, &y, None, &cfg).unwrap();
    let budget = AttributeBudget::default();
    for i in 0..10 {
        let row = x.row(i);
        let start = attribute_inference(&model, row, &[], y[i], &budget).unwrap();
        let done = attribute_inference(&model, row, &[1, 3], y[i], &budget).unwrap();
        assert!(done.loss <= start.loss + 1e-12);
        assert_eq!(done.row[0], row[0]);
        assert_eq!(done.row[2], row[2]);
    }
    assert!(attribute_inference(&model, &[0.0; 3], &[0], 1, &budget).is_err());
    assert!(attribute_inference(&model, x.row(0), &[7], 1, &budget).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completion_leaves_known_coordinates_alone(
        w in prop::collection::vec(-3.0f64..3.0, 5),
        row in prop::collection::vec(-5.0f64..5.0, 5),
        mask in 0u8..32,
        label in 0u8..2,
    ) {
        let missing: Vec<usize> = (0..5).filter(|j| mask >> j & 1 == 1).collect();
        let budget = AttributeBudget { steps: 50, ..Default::default() };
        let c = attribute_inference(&logreg(w), &row, &missing, label, &budget).unwrap();
        for j in 0..5 {
            if missing.contains(&j) {
                prop_assert!(c.row[j] >= budget.lower && c.row[j] <= budget.upper);
            } else {
                prop_assert_eq!(c.row[j], row[j]);
            }
        }
    }
}

fn flags(n: usize, seed: u64) -> Vec<u8> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0..12)).collect()
}

#[test]
fn leakage_on_unrelated_embeddings_is_near_chance() {
    let f = flags(2400, 1);
    let emb = random_matrix(&mut rng(2), f.len(), 4, 1.0);
    let report = feature_leakage_probe(&emb, &f, &LeakageSpec::default()).unwrap();
    let acc = report.metric("accuracy").unwrap();
    let chance = report.metric("chance_prior").unwrap();
    assert!((acc - chance).abs() < 0.05, "accuracy {acc} vs chance {chance}");
    assert!((report.metric("chance_uniform").unwrap() - 1.0 / 12.0).abs() < 1e-12);
}

#[test]
fn leakage_through_the_identity_is_total() {
    let f = flags(1200, 3);
    let rows: Vec<Vec<f64>> = f.iter().map(|&v| secret(v)).collect();
    let emb = Matrix::from_rows(&rows).unwrap();
    let report = feature_leakage_probe(&emb, &f, &LeakageSpec::default()).unwrap();
    assert!(report.metric("accuracy").unwrap() > 0.95);
    assert_eq!(report.metric("eval_rows").unwrap() + report.metric("aux_rows").unwrap(), 1200.0);
}

#[test]
fn leakage_rejects_tiny_aux_sets() {
    let f: Vec<u8> = (0..12).collect();
    let emb = random_matrix(&mut rng(4), 12, 2, 1.0);
    assert!(feature_leakage_probe(&emb, &f, &LeakageSpec::default()).is_err());
}

#[test]
fn attack_kinds_parse_and_print() {
    for k in AttackKind::ALL {
        assert_eq!(k.to_string().parse::<AttackKind>().unwrap(), k);
    }
    assert!("nope".parse::<AttackKind>().is_err());
}
