use serde::{Deserialize, Serialize};

use super::dense::{backward, forward_trace, Activation, DenseParams, Layer};
use super::linear::{sigmoid, softplus};
use super::sgd::{loss_and_grad, SgdData, SgdModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Binary MLP: ReLU hidden layers and a linear logit passed through a sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub net: DenseParams,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], seed: u64) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(1);
        Mlp {
            net: DenseParams::new(&dims, Activation::Linear, seed),
        }
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let layers: Vec<&Layer> = self.net.layers.iter().collect();
        forward_trace(&layers, x).pop().expect("output")[0]
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Layer by layer, weights then bias.
    pub fn params(&self) -> Vec<f64> {
        self.net.flatten()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.net.param_count() {
            return Err(Error::DimMismatch {
                expected: self.net.param_count(),
                got: p.len(),
            });
        }
        self.net.load_flat(p).map(|_| ())
    }

    /// Mean log-loss and its gradient in [`Self::params`] layout.
    pub fn loss_gradient(&self, x: &Matrix, y: &[f64], w: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        loss_and_grad(self, &SgdData { x, y, w })
    }

    /// Log-loss of one row and its gradient with respect to the input.
    pub fn input_gradient(&self, x: &[f64], y: f64) -> (f64, Vec<f64>) {
        let layers: Vec<&Layer> = self.net.layers.iter().collect();
        let acts = forward_trace(&layers, x);
        let z = acts.last().expect("output")[0];
        let mut scratch = vec![0.0; self.net.param_count()];
        let dx = backward(&layers, &acts, vec![sigmoid(z) - y], &mut scratch);
        (softplus(z) - y * z, dx)
    }
}

impl SgdModel for Mlp {
    fn n_params(&self) -> usize {
        self.net.param_count()
    }

    fn row_loss(&self, x: &[f64], y: f64, grad: Option<(&mut [f64], f64)>) -> f64 {
        let layers: Vec<&Layer> = self.net.layers.iter().collect();
        let acts = forward_trace(&layers, x);
        let z = acts.last().expect("output")[0];
        if let Some((g, scale)) = grad {
            backward(&layers, &acts, vec![scale * (sigmoid(z) - y)], g);
        }
        softplus(z) - y * z
    }

    fn apply_step(&mut self, grad: &[f64], lr: f64) {
        let mut k = 0;
        for l in &mut self.net.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w -= lr * grad[k];
                k += 1;
            }
        }
    }
}
