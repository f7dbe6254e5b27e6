//! Attribute inference: fill in a record's unknown coordinates by minimising
//! the target model's loss for the record's known label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Classifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttributeBudget {
    pub steps: usize,
    pub step_size: f64,
    /// Box every completed coordinate is projected into.
    pub lower: f64,
    pub upper: f64,
    /// Candidate values per coordinate for non-differentiable targets.
    pub grid_points: usize,
    /// Coordinate sweeps of the grid search.
    pub sweeps: usize,
}

impl Default for AttributeBudget {
    fn default() -> Self {
        AttributeBudget {
            steps: 500,
            step_size: 0.1,
            lower: -3.0,
            upper: 3.0,
            grid_points: 12,
            sweeps: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub row: Vec<f64>,
    pub loss: f64,
}

fn log_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Completes `row` at the `missing` coordinates. Gradient targets use
/// projected gradient descent; boosted trees fall back to a coordinate-wise
/// grid search. Known coordinates are never touched.
pub fn attribute_inference(
    model: &Classifier,
    row: &[f64],
    missing: &[usize],
    label: u8,
    budget: &AttributeBudget,
) -> Result<Completion> {
    if row.len() != model.input_dim() {
        return Err(Error::DimMismatch {
            expected: model.input_dim(),
            got: row.len(),
        });
    }
    if let Some(&j) = missing.iter().find(|&&j| j >= row.len()) {
        return Err(Error::invalid(format!("missing index {j} out of range")));
    }
    if !(budget.lower <= budget.upper) {
        return Err(Error::config("attribute box has lower > upper"));
    }
    let y = f64::from(label);
    let mut x = row.to_vec();
    if missing.is_empty() {
        let loss = log_loss(model.predict(&x)?, y);
        return Ok(Completion { row: x, loss });
    }
    for &j in missing {
        x[j] = x[j].clamp(budget.lower, budget.upper);
    }
    if model.is_differentiable() {
        for _ in 0..budget.steps {
            let (_, g) = model.input_gradient(&x, y).expect("differentiable");
            for &j in missing {
                x[j] = (x[j] - budget.step_size * g[j]).clamp(budget.lower, budget.upper);
            }
        }
        let (loss, _) = model.input_gradient(&x, y).expect("differentiable");
        return Ok(Completion { row: x, loss });
    }
    let n = budget.grid_points.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|k| budget.lower + (budget.upper - budget.lower) * k as f64 / (n - 1) as f64)
        .collect();
    let mut best = log_loss(model.predict(&x)?, y);
    for _ in 0..budget.sweeps.max(1) {
        for &j in missing {
            let keep = x[j];
            let mut choice = (best, keep);
            for &v in &grid {
                x[j] = v;
                let l = log_loss(model.predict(&x)?, y);
                if l < choice.0 {
                    choice = (l, v);
                }
            }
            x[j] = choice.1;
            best = choice.0;
        }
    }
    Ok(Completion { row: x, loss: best })
}
