//! Account-side autoencoder: the shared feature extractor.

use serde::{Deserialize, Serialize};

use super::dense::{backward, forward_trace, Activation, DenseParams, Layer};
use super::scalar::Scalar;
use super::sgd::{full_loss, SgdData, SgdModel, SgdTrainer, TrainSpec};
use crate::data::FLAG_ENCODING_DIM;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub latent_dim: usize,
    pub train: TrainSpec,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            input_dim: FLAG_ENCODING_DIM,
            hidden: 8,
            latent_dim: 4,
            train: TrainSpec {
                epochs: 50,
                learning_rate: 0.01,
                batch_size: 256,
                seed: 0,
            },
        }
    }
}

/// Encoder `h` and decoder `h'`: `input → hidden (ReLU) → latent (linear)` and
/// `latent → hidden (ReLU) → input (linear)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub encoder: DenseParams,
    pub decoder: DenseParams,
}

impl Autoencoder {
    pub fn new(input_dim: usize, hidden: usize, latent_dim: usize, seed: u64) -> Self {
        Autoencoder {
            encoder: DenseParams::new(
                &[input_dim, hidden, latent_dim],
                Activation::Linear,
                crate::seed::derive(seed, "encoder"),
            ),
            decoder: DenseParams::new(
                &[latent_dim, hidden, input_dim],
                Activation::Linear,
                crate::seed::derive(seed, "decoder"),
            ),
        }
    }

    pub fn from_config(cfg: &AeConfig, seed: u64) -> Self {
        Self::new(cfg.input_dim, cfg.hidden, cfg.latent_dim, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        if self.decoder.input_dim() != self.latent_dim() {
            return Err(Error::DimMismatch {
                expected: self.latent_dim(),
                got: self.decoder.input_dim(),
            });
        }
        if self.decoder.output_dim() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: self.decoder.output_dim(),
            });
        }
        Ok(())
    }

    /// Encoder parameters followed by decoder parameters.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.encoder.flatten_into(&mut out);
        self.decoder.flatten_into(&mut out);
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let k = self.encoder.load_flat(flat)?;
        self.decoder.load_flat(&flat[k..])?;
        Ok(())
    }

    /// The embedding `h(x)`.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.encoder.forward(x)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decoder.forward(&self.encode(x)?)
    }

    fn stack(&self) -> Vec<&Layer> {
        self.encoder
            .layers
            .iter()
            .chain(&self.decoder.layers)
            .collect()
    }

    /// `‖h'(h(x)) − x‖²` for one sample; adds its parameter gradient to `grad`
    /// (flat layout of [`flatten`](Self::flatten)). Generic so the gradient
    /// itself can be differentiated with respect to `x`.
    pub fn sample_loss_grad<T: Scalar>(&self, x: &[T], grad: &mut [T]) -> T {
        let stack = self.stack();
        let acts = forward_trace(&stack, x);
        let out = acts.last().expect("output");
        let mut loss = T::zero();
        let delta: Vec<T> = out
            .iter()
            .zip(x)
            .map(|(r, xi)| {
                let e = *r - *xi;
                loss += e * e;
                e.scale(2.0)
            })
            .collect();
        backward(&stack, &acts, delta, grad);
        loss
    }

    /// Mean over rows of `‖h'(h(x)) − x‖²`.
    pub fn loss(&self, x: &Matrix) -> f64 {
        let y = vec![0.0; x.rows()];
        full_loss(
            self,
            &SgdData {
                x,
                y: &y,
                w: None,
            },
        )
    }

    /// Mean-loss gradient over all rows.
    pub fn gradient(&self, x: &Matrix) -> Vec<f64> {
        let mut g = vec![0.0; self.param_count()];
        let mut tmp = vec![0.0; self.param_count()];
        for row in x.iter_rows() {
            tmp.iter_mut().for_each(|v| *v = 0.0);
            self.sample_loss_grad(row, &mut tmp);
            for (a, b) in g.iter_mut().zip(&tmp) {
                *a += b / x.rows() as f64;
            }
        }
        g
    }
}

impl SgdModel for Autoencoder {
    fn n_params(&self) -> usize {
        self.param_count()
    }

    fn row_loss(&self, x: &[f64], _y: f64, grad: Option<(&mut [f64], f64)>) -> f64 {
        match grad {
            None => {
                let r = self.reconstruct(x).expect("dims checked");
                r.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum()
            }
            Some((g, scale)) => {
                let mut tmp = vec![0.0; self.param_count()];
                let loss = self.sample_loss_grad(x, &mut tmp);
                for (a, b) in g.iter_mut().zip(&tmp) {
                    *a += scale * b;
                }
                loss
            }
        }
    }

    fn apply_step(&mut self, grad: &[f64], lr: f64) {
        let mut flat = self.flatten();
        for (p, g) in flat.iter_mut().zip(grad) {
            *p -= lr * g;
        }
        self.load_flat(&flat).expect("same shape");
    }
}

/// Local training state of one account client, kept across rounds so that a
/// single client trained over several rounds follows the same trajectory as
/// one uninterrupted run.
#[derive(Debug, Clone)]
pub struct AeTrainer {
    inner: SgdTrainer,
}

impl AeTrainer {
    pub fn new(spec: TrainSpec) -> Result<Self> {
        Ok(AeTrainer {
            inner: SgdTrainer::new(spec)?,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.inner.lr
    }

    pub fn epochs_done(&self) -> u64 {
        self.inner.epochs_done
    }

    /// Trains `model` in place for `epochs`; returns the loss trace
    /// (initial loss, then one entry per epoch).
    pub fn train(&mut self, model: &mut Autoencoder, x: &Matrix, epochs: usize) -> Result<Vec<f64>> {
        if x.is_empty() {
            return Err(Error::invalid("empty shard"));
        }
        if x.cols() != model.input_dim() {
            return Err(Error::DimMismatch {
                expected: model.input_dim(),
                got: x.cols(),
            });
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("shard features"));
        }
        let y = vec![0.0; x.rows()];
        Ok(self.inner.run(
            model,
            &SgdData {
                x,
                y: &y,
                w: None,
            },
            epochs,
        ))
    }
}

/// Trains a copy of `init` on one shard for `spec.epochs` epochs.
pub fn ae_train_local(shard: &Matrix, init: &Autoencoder, spec: &TrainSpec) -> Result<Autoencoder> {
    let mut model = init.clone();
    AeTrainer::new(spec.clone())?.train(&mut model, shard, spec.epochs)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Flag;

    fn shard(rows: &[[f64; 13]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_epochs_is_identity() {
        let init = Autoencoder::new(13, 8, 4, 1);
        let x = shard(&[Flag::new(3).unwrap().encode()]);
        let spec = TrainSpec {
            epochs: 0,
            ..TrainSpec::default()
        };
        assert_eq!(ae_train_local(&x, &init, &spec).unwrap(), init);
    }

    #[test]
    fn constant_shard_is_compressed() {
        let r = Flag::new(9).unwrap().encode();
        let x = shard(&vec![r; 32]);
        let init = Autoencoder::new(13, 8, 4, 3);
        let spec = TrainSpec {
            epochs: 400,
            learning_rate: 0.05,
            batch_size: 32,
            seed: 1,
        };
        let model = ae_train_local(&x, &init, &spec).unwrap();
        assert!(model.loss(&x) / 13.0 < 1e-3, "mse {}", model.loss(&x) / 13.0);
    }

    #[test]
    fn loss_non_increasing() {
        let rows: Vec<[f64; 13]> = (0..60).map(|i| Flag::new((i % 12) as u8).unwrap().encode()).collect();
        let x = shard(&rows);
        let mut model = Autoencoder::new(13, 8, 4, 5);
        let mut t = AeTrainer::new(TrainSpec {
            learning_rate: 0.5,
            batch_size: 8,
            ..TrainSpec::default()
        })
        .unwrap();
        let trace = t.train(&mut model, &x, 30).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{trace:?}");
        assert!(t.learning_rate() <= 0.5);
    }

    #[test]
    fn split_training_equals_single_run() {
        let rows: Vec<[f64; 13]> = (0..40).map(|i| Flag::new((i * 7 % 12) as u8).unwrap().encode()).collect();
        let x = shard(&rows);
        let init = Autoencoder::new(13, 8, 4, 9);
        let spec = TrainSpec {
            epochs: 12,
            batch_size: 16,
            learning_rate: 0.2,
            seed: 4,
        };
        let whole = ae_train_local(&x, &init, &spec).unwrap();
        let mut t = AeTrainer::new(spec).unwrap();
        let mut split = init.clone();
        for _ in 0..4 {
            t.train(&mut split, &x, 3).unwrap();
        }
        assert_eq!(split, whole);
    }

    #[test]
    fn errors() {
        let init = Autoencoder::new(13, 8, 4, 1);
        let empty = Matrix::zeros(0, 13);
        assert!(ae_train_local(&empty, &init, &TrainSpec::default()).is_err());
        let mut bad = Flag::new(1).unwrap().encode();
        bad[2] = f64::NAN;
        assert!(ae_train_local(&shard(&[bad]), &init, &TrainSpec::default()).is_err());
        assert!(init.encode(&[1.0; 5]).is_err());
    }

    #[test]
    fn encode_shape_and_purity() {
        let m = Autoencoder::new(13, 8, 6, 2);
        let x = Flag::new(4).unwrap().encode();
        let a = m.encode(&x).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, m.encode(&x).unwrap());
    }

    #[test]
    fn identity_encoder() {
        let mut m = Autoencoder::new(4, 4, 4, 0);
        for l in &mut m.encoder.layers {
            l.weights = (0..16).map(|k| if k % 5 == 0 { 1.0 } else { 0.0 }).collect();
            l.bias = vec![0.0; 4];
            l.activation = Activation::Linear;
        }
        let x = [0.5, -2.0, 3.0, 0.0];
        assert_eq!(m.encode(&x).unwrap(), x.to_vec());
    }
}
