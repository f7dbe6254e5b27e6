//! The transaction-side classifier zoo behind one interface.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::gbdt::{train_gbdt, Gbdt, GbdtConfig};
use super::linear::{LinearLoss, LinearModel};
use super::mlp::Mlp;
use super::sgd::{SgdData, SgdTrainer, TrainSpec};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Gbdt,
    LogReg,
    LinearSvm,
    Mlp,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Gbdt,
        ClassifierKind::LinearSvm,
        ClassifierKind::LogReg,
        ClassifierKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Gbdt => "gbdt",
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::LinearSvm => "svm",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbdt" | "xgboost" => Ok(ClassifierKind::Gbdt),
            "logreg" | "lr" => Ok(ClassifierKind::LogReg),
            "svm" | "linear_svm" => Ok(ClassifierKind::LinearSvm),
            "mlp" => Ok(ClassifierKind::Mlp),
            other => Err(Error::config(format!("unknown classifier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    /// Epochs, batch and step size for the gradient-trained kinds; `seed` is shared.
    pub train: TrainSpec,
    pub gbdt: GbdtConfig,
    pub hidden: Vec<usize>,
    /// SVM regularisation strength.
    pub l2: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self::for_kind(ClassifierKind::Gbdt)
    }
}

impl ClassifierConfig {
    pub fn for_kind(kind: ClassifierKind) -> Self {
        let train = match kind {
            ClassifierKind::Gbdt => TrainSpec::default(),
            ClassifierKind::LogReg | ClassifierKind::LinearSvm => TrainSpec {
                epochs: 10,
                learning_rate: 0.1,
                batch_size: 256,
                seed: 0,
            },
            ClassifierKind::Mlp => TrainSpec {
                epochs: 15,
                learning_rate: 0.1,
                batch_size: 256,
                seed: 0,
            },
        };
        ClassifierConfig {
            kind,
            train,
            gbdt: GbdtConfig::default(),
            hidden: vec![32, 16],
            l2: 1e-3,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Classifier {
    Gbdt(Gbdt),
    LogReg(LinearModel),
    LinearSvm(LinearModel),
    Mlp(Mlp),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Gbdt(_) => ClassifierKind::Gbdt,
            Classifier::LogReg(_) => ClassifierKind::LogReg,
            Classifier::LinearSvm(_) => ClassifierKind::LinearSvm,
            Classifier::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Classifier::Gbdt(m) => m.n_features,
            Classifier::LogReg(m) | Classifier::LinearSvm(m) => m.weights.len(),
            Classifier::Mlp(m) => m.net.input_dim(),
        }
    }

    /// Score in `[0, 1]`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Classifier::Gbdt(m) => m.score(x),
            Classifier::LogReg(m) | Classifier::LinearSvm(m) => m.score(x),
            Classifier::Mlp(m) => m.score(x),
        }
    }

    pub fn predict_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.input_dim() && !x.is_empty() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.predict_unchecked(r)).collect())
    }

    /// Whether gradients with respect to the input exist.
    pub fn is_differentiable(&self) -> bool {
        !matches!(self, Classifier::Gbdt(_))
    }

    /// Log-loss (hinge for the SVM) of one row and its input gradient.
    pub fn input_gradient(&self, x: &[f64], y: f64) -> Option<(f64, Vec<f64>)> {
        match self {
            Classifier::Gbdt(_) => None,
            Classifier::LogReg(m) | Classifier::LinearSvm(m) => Some(m.input_gradient(x, y)),
            Classifier::Mlp(m) => Some(m.input_gradient(x, y)),
        }
    }
}

/// Trains a classifier of `config.kind`. Labels must contain both classes;
/// `weights`, when given, scale each row's loss.
pub fn classifier_train(
    rows: &Matrix,
    labels: &[u8],
    weights: Option<&[f64]>,
    config: &ClassifierConfig,
) -> Result<Classifier> {
    if rows.rows() != labels.len() {
        return Err(Error::DimMismatch {
            expected: rows.rows(),
            got: labels.len(),
        });
    }
    if !labels.iter().any(|&l| l == 1) || !labels.iter().any(|&l| l == 0) {
        return Err(Error::invalid("training labels must contain both classes"));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    if !rows.all_finite() {
        return Err(Error::NonFinite("classifier features"));
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let data = SgdData {
        x: rows,
        y: &y,
        w: weights,
    };
    data.check()?;
    let dim = rows.cols();
    let model = match config.kind {
        ClassifierKind::Gbdt => {
            let cfg = &config.gbdt;
            if !(cfg.learning_rate > 0.0) || cfg.lambda < 0.0 {
                return Err(Error::config("gbdt needs learning_rate > 0 and lambda >= 0"));
            }
            Classifier::Gbdt(train_gbdt(rows, &y, weights, cfg))
        }
        ClassifierKind::LogReg => {
            let mut m = LinearModel::zeros(dim, LinearLoss::Logistic);
            SgdTrainer::new(config.train.clone())?.run(&mut m, &data, config.train.epochs);
            Classifier::LogReg(m)
        }
        ClassifierKind::LinearSvm => {
            let mut m = LinearModel::zeros(dim, LinearLoss::Hinge { l2: config.l2 });
            SgdTrainer::new(config.train.clone())?.run(&mut m, &data, config.train.epochs);
            Classifier::LinearSvm(m)
        }
        ClassifierKind::Mlp => {
            let mut m = Mlp::new(
                dim,
                &config.hidden,
                crate::seed::derive(config.train.seed, "mlp-init"),
            );
            SgdTrainer::new(config.train.clone())?.run(&mut m, &data, config.train.epochs);
            Classifier::Mlp(m)
        }
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Matrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..40 {
            let t = (i as f64) * 0.1;
            rows.push(vec![1.5 + t, (i % 5) as f64 - 2.0]);
            labels.push(1);
            rows.push(vec![-1.5 - t, ((i * 3) % 5) as f64 - 2.0]);
            labels.push(0);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn every_kind_separates_toy_set() {
        let (x, y) = separable();
        for kind in ClassifierKind::ALL {
            let mut cfg = ClassifierConfig::for_kind(kind);
            cfg.train.epochs = 50;
            cfg.gbdt.rounds = 10;
            let m = classifier_train(&x, &y, None, &cfg).unwrap();
            let acc = x
                .iter_rows()
                .zip(&y)
                .filter(|(r, &l)| u8::from(m.predict(r).unwrap() >= 0.5) == l)
                .count() as f64
                / y.len() as f64;
            assert_eq!(acc, 1.0, "{kind}");
        }
    }

    #[test]
    fn zero_negative_weights_push_positives_up() {
        let (x, y) = separable();
        let w: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let cfg = ClassifierConfig::for_kind(ClassifierKind::LogReg);
        let m = classifier_train(&x, &y, Some(&w), &cfg).unwrap();
        for (r, &l) in x.iter_rows().zip(&y) {
            if l == 1 {
                assert!(m.predict(r).unwrap() >= 0.5);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let (x, _) = separable();
        let ones = vec![1u8; x.rows()];
        let cfg = ClassifierConfig::default();
        assert!(classifier_train(&x, &ones, None, &cfg).is_err());
        let (mut x, y) = separable();
        x.set(3, 1, f64::NAN);
        assert!(classifier_train(&x, &y, None, &cfg).is_err());
    }

    #[test]
    fn predict_checks_dims() {
        let (x, y) = separable();
        let m = classifier_train(&x, &y, None, &ClassifierConfig::for_kind(ClassifierKind::LogReg)).unwrap();
        assert!(m.predict(&[1.0]).is_err());
    }
}
