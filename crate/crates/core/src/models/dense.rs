//! Fully connected layers with manual backprop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z.value() > 0.0 {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Linear => z,
            Activation::Sigmoid => T::cst(1.0) / (T::cst(1.0) + (-z).exp()),
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn grad_from_output<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Relu => T::cst(if a.value() > 0.0 { 1.0 } else { 0.0 }),
            Activation::Linear => T::cst(1.0),
            Activation::Sigmoid => a * (T::cst(1.0) - a),
        }
    }
}

/// One affine layer followed by an activation. Weights are `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    fn forward<T: Scalar>(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let mut z = T::cst(self.bias[o]);
            for (wi, xi) in w.iter().zip(x) {
                z += xi.scale(*wi);
            }
            out.push(self.activation.apply(z));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub layers: Vec<Layer>,
}

impl DenseParams {
    /// He-uniform initialised stack. `dims = [in, h1, ..., out]`; hidden layers
    /// use ReLU, the last layer `output`.
    pub fn new(dims: &[usize], output: Activation, seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut rng = seed::rng(seed);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (inputs, outputs) = (w[0], w[1]);
                let bound = (6.0 / inputs as f64).sqrt();
                let bound = if i + 2 == dims.len() { bound / 2.0f64.sqrt() } else { bound };
                Layer {
                    inputs,
                    outputs,
                    weights: (0..inputs * outputs)
                        .map(|_| rng.random_range(-bound..bound))
                        .collect(),
                    bias: vec![0.0; outputs],
                    activation: if i + 2 == dims.len() {
                        output
                    } else {
                        Activation::Relu
                    },
                }
            })
            .collect();
        DenseParams { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Layer dimensions chain and every entry is finite.
    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::invalid(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::DimMismatch {
                    expected: self.layers[i - 1].outputs,
                    got: l.inputs,
                });
            }
            if !l.weights.iter().chain(&l.bias).all(|v| v.is_finite()) {
                return Err(Error::NonFinite("dense parameters"));
            }
        }
        Ok(())
    }

    /// Parameters flattened layer by layer, weights before bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.flatten_into(&mut out);
        out
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
    }

    /// Inverse of [`flatten`](Self::flatten); returns the number of values consumed.
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<usize> {
        let need = self.param_count();
        if flat.len() < need {
            return Err(Error::DimMismatch {
                expected: need,
                got: flat.len(),
            });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        Ok(k)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(forward_trace(&self.layers.iter().collect::<Vec<_>>(), x)
            .pop()
            .expect("at least the input"))
    }
}

/// Post-activation values of every layer, input first.
pub(crate) fn forward_trace<T: Scalar>(layers: &[&Layer], x: &[T]) -> Vec<Vec<T>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_vec());
    for l in layers {
        let mut out = Vec::with_capacity(l.outputs);
        l.forward(acts.last().expect("nonempty"), &mut out);
        acts.push(out);
    }
    acts
}

/// Backpropagates `delta` (gradient w.r.t. the last layer's pre-activation)
/// and accumulates parameter gradients into `grad` (flat layout, possibly
/// offset by the caller). Returns the gradient w.r.t. the network input.
pub(crate) fn backward<T: Scalar>(
    layers: &[&Layer],
    acts: &[Vec<T>],
    mut delta: Vec<T>,
    grad: &mut [T],
) -> Vec<T> {
    let offsets: Vec<usize> = layers
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.param_count();
            Some(o)
        })
        .collect();
    for li in (0..layers.len()).rev() {
        let l = layers[li];
        let a_in = &acts[li];
        let off = offsets[li];
        let (gw, rest) = grad[off..off + l.param_count()].split_at_mut(l.weights.len());
        for o in 0..l.outputs {
            let d = delta[o];
            let row = &mut gw[o * l.inputs..(o + 1) * l.inputs];
            for (g, a) in row.iter_mut().zip(a_in) {
                *g += d * *a;
            }
            rest[o] += d;
        }
        let mut d_in = vec![T::zero(); l.inputs];
        for o in 0..l.outputs {
            let d = delta[o];
            let w = &l.weights[o * l.inputs..(o + 1) * l.inputs];
            for (di, wi) in d_in.iter_mut().zip(w) {
                *di += d.scale(*wi);
            }
        }
        if li > 0 {
            let act = layers[li - 1].activation;
            for (di, a) in d_in.iter_mut().zip(a_in) {
                *di = *di * act.grad_from_output(*a);
            }
        }
        delta = d_in;
    }
    delta
}
