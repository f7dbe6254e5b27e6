//! Gradient inversion: find an input whose parameter gradient points the same
//! way as an observed one, maximising their cosine similarity with Adam.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::scalar::Dual;
use crate::models::Autoencoder;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamScope {
    /// Encoder and decoder parameters.
    #[default]
    Full,
    Encoder,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionProblem {
    pub model: Autoencoder,
    /// Observed gradient of the reconstruction loss (flat parameter layout).
    pub observed: Vec<f64>,
    pub scope: ParamScope,
    pub steps: usize,
    pub step_size: f64,
    /// Weight of an optional `‖x‖²` penalty; 0 gives the plain objective.
    pub prior_weight: f64,
    /// Start point; uniform on `[0, 1)` per coordinate when absent.
    pub init: Option<Vec<f64>>,
    pub seed: u64,
}

impl InversionProblem {
    pub fn new(model: Autoencoder, observed: Vec<f64>, seed: u64) -> Self {
        InversionProblem {
            model,
            observed,
            scope: ParamScope::Full,
            steps: 2000,
            step_size: 0.01,
            prior_weight: 0.0,
            init: None,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub recovered: Vec<f64>,
    pub best_objective: f64,
    /// Best objective seen so far, before the first step and after each one.
    pub trace: Vec<f64>,
}

/// Mean reconstruction-loss gradient over `batch`: what one local step leaks.
pub fn observed_gradient(model: &Autoencoder, batch: &Matrix) -> Result<Vec<f64>> {
    if batch.rows() == 0 || batch.cols() != model.input_dim() {
        return Err(Error::DimMismatch {
            expected: model.input_dim(),
            got: batch.cols(),
        });
    }
    Ok(model.gradient(batch))
}

fn scope_len(model: &Autoencoder, scope: ParamScope) -> usize {
    match scope {
        ParamScope::Full => model.param_count(),
        ParamScope::Encoder => model.encoder.param_count(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cosine objective at `x` and its gradient with respect to `x`. Each input
/// coordinate gets one forward-mode pass through the backprop code, which
/// yields the parameter gradient and its derivative along that coordinate.
fn objective(p: &InversionProblem, target: &[f64], tnorm: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let n = target.len();
    let total = p.model.param_count();
    let mut g = vec![0.0; n];
    let mut dg = vec![vec![0.0; n]; x.len()];
    let mut buf = vec![Dual::new(0.0, 0.0); total];
    for j in 0..x.len() {
        let xd: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::new(v, if i == j { 1.0 } else { 0.0 }))
            .collect();
        buf.iter_mut().for_each(|b| *b = Dual::new(0.0, 0.0));
        p.model.sample_loss_grad(&xd, &mut buf);
        for k in 0..n {
            g[k] = buf[k].v;
            dg[j][k] = buf[k].d;
        }
    }
    let gnorm = dot(&g, &g).sqrt();
    if gnorm == 0.0 {
        return (0.0, vec![0.0; x.len()]);
    }
    let gt = dot(&g, target);
    let cos = gt / (gnorm * tnorm);
    let mut grad: Vec<f64> = dg
        .iter()
        .map(|d| dot(d, target) / (gnorm * tnorm) - cos * dot(&g, d) / (gnorm * gnorm))
        .collect();
    let mut obj = cos;
    if p.prior_weight > 0.0 {
        obj -= p.prior_weight * dot(x, x);
        for (gi, xi) in grad.iter_mut().zip(x) {
            *gi -= 2.0 * p.prior_weight * xi;
        }
    }
    (obj, grad)
}

pub fn gradient_inversion(p: &InversionProblem) -> Result<InversionResult> {
    p.model.validate()?;
    if p.observed.len() != p.model.param_count() {
        return Err(Error::DimMismatch {
            expected: p.model.param_count(),
            got: p.observed.len(),
        });
    }
    let target = &p.observed[..scope_len(&p.model, p.scope)];
    let tnorm = dot(target, target).sqrt();
    if !tnorm.is_finite() {
        return Err(Error::NonFinite("observed gradient"));
    }
    if tnorm == 0.0 {
        return Err(Error::invalid("observed gradient is zero"));
    }
    let dim = p.model.input_dim();
    let mut x = match &p.init {
        Some(v) if v.len() == dim => v.clone(),
        Some(v) => {
            return Err(Error::DimMismatch {
                expected: dim,
                got: v.len(),
            })
        }
        None => {
            let mut rng = seed::rng(seed::derive(p.seed, "inversion-init"));
            (0..dim).map(|_| rng.random::<f64>()).collect()
        }
    };
    let mut opt = Adam::new(dim, p.step_size);
    let (mut obj, mut grad) = objective(p, target, tnorm, &x);
    let mut best = (obj, x.clone());
    let mut trace = Vec::with_capacity(p.steps + 1);
    trace.push(obj);
    for _ in 0..p.steps {
        if !obj.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("inversion objective"));
        }
        let ascent: Vec<f64> = grad.iter().map(|g| -g).collect();
        opt.step(&mut x, &ascent);
        (obj, grad) = objective(p, target, tnorm, &x);
        if obj > best.0 {
            best = (obj, x.clone());
        }
        trace.push(best.0);
    }
    Ok(InversionResult {
        recovered: best.1,
        best_objective: best.0,
        trace,
    })
}
