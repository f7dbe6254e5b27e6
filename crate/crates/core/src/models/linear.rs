//! Logistic regression and linear SVM.

use serde::{Deserialize, Serialize};

use super::sgd::{loss_and_grad, SgdData, SgdModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearLoss {
    Logistic,
    /// Hinge loss with `l2/2 · ‖w‖²`.
    Hinge { l2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub loss: LinearLoss,
}

impl LinearModel {
    pub fn zeros(dim: usize, loss: LinearLoss) -> Self {
        LinearModel {
            weights: vec![0.0; dim],
            bias: 0.0,
            loss,
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Probability for logistic regression; `sigmoid(2·margin)` for the SVM.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self.loss {
            LinearLoss::Logistic => sigmoid(self.margin(x)),
            LinearLoss::Hinge { .. } => sigmoid(2.0 * self.margin(x)),
        }
    }

    /// Derivative of the per-row loss with respect to the margin.
    fn dloss_dmargin(&self, m: f64, y: f64) -> (f64, f64) {
        match self.loss {
            LinearLoss::Logistic => {
                // y ∈ {0,1}: loss = softplus(m) − y·m
                (softplus(m) - y * m, sigmoid(m) - y)
            }
            LinearLoss::Hinge { .. } => {
                let s = 2.0 * y - 1.0;
                if s * m < 1.0 {
                    (1.0 - s * m, -s)
                } else {
                    (0.0, 0.0)
                }
            }
        }
    }

    /// `[weights, bias]`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.weights.len() + 1 {
            return Err(Error::DimMismatch {
                expected: self.weights.len() + 1,
                got: p.len(),
            });
        }
        self.weights.copy_from_slice(&p[..p.len() - 1]);
        self.bias = p[p.len() - 1];
        Ok(())
    }

    /// Weighted mean training loss and its gradient in [`Self::params`] layout.
    pub fn loss_gradient(&self, x: &Matrix, y: &[f64], w: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        loss_and_grad(self, &SgdData { x, y, w })
    }

    /// Gradient of the per-row loss with respect to the input.
    pub fn input_gradient(&self, x: &[f64], y: f64) -> (f64, Vec<f64>) {
        let (loss, d) = self.dloss_dmargin(self.margin(x), y);
        (loss, self.weights.iter().map(|w| d * w).collect())
    }
}

impl SgdModel for LinearModel {
    fn n_params(&self) -> usize {
        self.weights.len() + 1
    }

    fn row_loss(&self, x: &[f64], y: f64, grad: Option<(&mut [f64], f64)>) -> f64 {
        let (loss, d) = self.dloss_dmargin(self.margin(x), y);
        if let Some((g, scale)) = grad {
            if d != 0.0 {
                let k = scale * d;
                let (gw, gb) = g.split_at_mut(self.weights.len());
                for (gi, xi) in gw.iter_mut().zip(x) {
                    *gi += k * xi;
                }
                gb[0] += k;
            }
        }
        loss
    }

    fn penalty(&self, grad: Option<&mut [f64]>) -> f64 {
        match self.loss {
            LinearLoss::Logistic => 0.0,
            LinearLoss::Hinge { l2 } => {
                if let Some(g) = grad {
                    for (gi, w) in g.iter_mut().zip(&self.weights) {
                        *gi += l2 * w;
                    }
                }
                0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
            }
        }
    }

    fn apply_step(&mut self, grad: &[f64], lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(grad) {
            *w -= lr * g;
        }
        self.bias -= lr * grad[self.weights.len()];
    }
}
