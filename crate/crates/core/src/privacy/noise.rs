use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-column standardisation statistics, fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero for constant columns.
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(Error::invalid("cannot normalise an empty matrix"));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("normalisation input"));
        }
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Ok(NormStats { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v -= m;
            if *s > 0.0 {
                *v /= s;
            }
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: x.cols(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            self.apply_row(out.row_mut(i));
        }
        Ok(out)
    }
}

/// Standardises every column to zero mean and unit population variance.
/// Constant columns are only centred.
pub fn normalize_standard(x: &Matrix) -> Result<(Matrix, NormStats)> {
    let stats = NormStats::fit(x)?;
    let out = stats.apply(x)?;
    Ok((out, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub variance: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(variance: f64, seed: u64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::config(format!("noise variance must be >= 0, got {variance}")));
        }
        Ok(NoiseSpec { variance, seed })
    }
}

/// Adds i.i.d. `N(0, variance)` to every entry. Row `i` draws from its own
/// stream of the spec's seed, so a row's noise does not depend on the rows
/// around it.
pub fn add_gaussian_noise(x: &Matrix, spec: &NoiseSpec) -> Result<Matrix> {
    if !(spec.variance >= 0.0) {
        return Err(Error::config("noise variance must be >= 0"));
    }
    if !x.all_finite() {
        return Err(Error::NonFinite("noise input"));
    }
    let mut out = x.clone();
    if spec.variance == 0.0 {
        return Ok(out);
    }
    let sd = spec.variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for i in 0..out.rows() {
        rng.set_stream(i as u64);
        rng.set_word_pos(0);
        for v in out.row_mut(i) {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMetrics {
    pub avg_l2: f64,
    pub avg_cos: f64,
    /// Rows left out of `avg_cos` because one side was the zero vector.
    pub zero_rows: usize,
}

pub fn noise_metrics(original: &Matrix, noisy: &Matrix) -> Result<NoiseMetrics> {
    if original.rows() != noisy.rows() || original.cols() != noisy.cols() {
        return Err(Error::DimMismatch {
            expected: original.rows() * original.cols(),
            got: noisy.rows() * noisy.cols(),
        });
    }
    if original.rows() == 0 {
        return Err(Error::invalid("noise metrics need at least one row"));
    }
    let mut l2 = 0.0;
    let mut cos = 0.0;
    let mut counted = 0usize;
    for (a, b) in original.iter_rows().zip(noisy.iter_rows()) {
        let mut d2 = 0.0;
        let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            d2 += (y - x) * (y - x);
            ab += x * y;
            aa += x * x;
            bb += y * y;
        }
        l2 += d2.sqrt();
        if aa > 0.0 && bb > 0.0 {
            cos += ab / (aa.sqrt() * bb.sqrt());
            counted += 1;
        }
    }
    let n = original.rows();
    Ok(NoiseMetrics {
        avg_l2: l2 / n as f64,
        avg_cos: if counted == 0 { 0.0 } else { cos / counted as f64 },
        zero_rows: n - counted,
    })
}
