//! Mini-batch SGD shared by the neural and linear models.
//!
//! Each epoch is checked against the full-data loss; if it went up the epoch
//! is replayed from the pre-epoch parameters with half the step size.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Replays allowed per epoch before the epoch is skipped.
const MAX_HALVINGS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    /// Epochs for gradient models, boosting rounds for GBDT.
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            epochs: 50,
            learning_rate: 0.01,
            batch_size: 256,
            seed: 0,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        Ok(())
    }
}

/// A model trainable by [`SgdTrainer`]. Losses are per row; the trainer
/// handles weighting and averaging.
pub(crate) trait SgdModel: Clone {
    fn n_params(&self) -> usize;

    /// Loss of one row; when `grad` is given adds `scale * dloss/dparams` to it.
    fn row_loss(&self, x: &[f64], y: f64, grad: Option<(&mut [f64], f64)>) -> f64;

    /// Regularisation term added once per batch (and once to the full loss).
    fn penalty(&self, _grad: Option<&mut [f64]>) -> f64 {
        0.0
    }

    fn apply_step(&mut self, grad: &[f64], lr: f64);
}

pub(crate) struct SgdData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [f64],
    pub w: Option<&'a [f64]>,
}

impl SgdData<'_> {
    fn weight(&self, i: usize) -> f64 {
        self.w.map_or(1.0, |w| w[i])
    }

    pub fn check(&self) -> Result<()> {
        if self.x.rows() != self.y.len() {
            return Err(Error::DimMismatch {
                expected: self.x.rows(),
                got: self.y.len(),
            });
        }
        if let Some(w) = self.w {
            if w.len() != self.y.len() {
                return Err(Error::DimMismatch {
                    expected: self.y.len(),
                    got: w.len(),
                });
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid("sample weights must be finite and >= 0"));
            }
        }
        if !self.x.all_finite() {
            return Err(Error::NonFinite("training features"));
        }
        Ok(())
    }
}

/// Weighted mean loss over all rows plus the penalty.
pub(crate) fn full_loss<M: SgdModel>(model: &M, data: &SgdData<'_>) -> f64 {
    let mut total = 0.0;
    let mut wsum = 0.0;
    for i in 0..data.x.rows() {
        let w = data.weight(i);
        if w == 0.0 {
            continue;
        }
        total += w * model.row_loss(data.x.row(i), data.y[i], None);
        wsum += w;
    }
    let data_loss = if wsum > 0.0 { total / wsum } else { 0.0 };
    data_loss + model.penalty(None)
}

/// Weighted mean loss (plus penalty) and its gradient with respect to the
/// parameters, in the layout `apply_step` expects.
pub(crate) fn loss_and_grad<M: SgdModel>(model: &M, data: &SgdData<'_>) -> Result<(f64, Vec<f64>)> {
    data.check()?;
    let mut grad = vec![0.0; model.n_params()];
    let wsum: f64 = (0..data.x.rows()).map(|i| data.weight(i)).sum();
    if wsum > 0.0 {
        for i in 0..data.x.rows() {
            let w = data.weight(i);
            if w > 0.0 {
                model.row_loss(data.x.row(i), data.y[i], Some((&mut grad, w / wsum)));
            }
        }
    }
    model.penalty(Some(&mut grad));
    Ok((full_loss(model, data), grad))
}

/// Mutable optimizer state carried across calls (e.g. across federation rounds).
#[derive(Debug, Clone, PartialEq)]
pub struct SgdTrainer {
    pub spec: TrainSpec,
    pub lr: f64,
    pub epochs_done: u64,
}

impl SgdTrainer {
    pub fn new(spec: TrainSpec) -> Result<Self> {
        spec.validate()?;
        Ok(SgdTrainer {
            lr: spec.learning_rate,
            spec,
            epochs_done: 0,
        })
    }

    /// Runs `epochs` epochs; returns the full-data loss before training and after each epoch.
    pub(crate) fn run<M: SgdModel>(
        &mut self,
        model: &mut M,
        data: &SgdData<'_>,
        epochs: usize,
    ) -> Vec<f64> {
        let n = data.x.rows();
        let mut trace = Vec::with_capacity(epochs + 1);
        let mut prev = full_loss(model, data);
        trace.push(prev);
        let mut grad = vec![0.0; model.n_params()];
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..epochs {
            let snapshot = model.clone();
            order.sort_unstable();
            order.shuffle(&mut seed::rng(seed::derive_n(
                self.spec.seed,
                "epoch",
                self.epochs_done,
            )));
            let mut halvings = 0;
            let loss = loop {
                for batch in order.chunks(self.spec.batch_size) {
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let wsum: f64 = batch.iter().map(|&i| data.weight(i)).sum();
                    if wsum <= 0.0 {
                        continue;
                    }
                    for &i in batch {
                        let w = data.weight(i);
                        if w == 0.0 {
                            continue;
                        }
                        model.row_loss(data.x.row(i), data.y[i], Some((&mut grad, w / wsum)));
                    }
                    model.penalty(Some(&mut grad));
                    model.apply_step(&grad, self.lr);
                }
                let loss = full_loss(model, data);
                if loss <= prev {
                    break loss;
                }
                *model = snapshot.clone();
                if halvings == MAX_HALVINGS {
                    break prev;
                }
                self.lr /= 2.0;
                halvings += 1;
            };
            self.epochs_done += 1;
            prev = loss;
            trace.push(loss);
        }
        trace
    }
}
