use std::ops::Range;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Neighbors considered by SMOTE.
pub const SMOTE_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    None,
    RandomUnder,
    RandomOver,
    Smote,
    Reweight,
}

impl Sampling {
    pub fn label(self) -> &'static str {
        match self {
            Sampling::None => "None",
            Sampling::RandomUnder => "RandomUnder",
            Sampling::RandomOver => "RandomOver",
            Sampling::Smote => "SMOTE",
            Sampling::Reweight => "Reweight",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rebalanced {
    pub rows: Matrix,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
}

/// Rebalances using every column for SMOTE's neighbor search.
pub fn rebalance(rows: &Matrix, labels: &[u8], method: Sampling, seed: u64) -> Result<Rebalanced> {
    rebalance_with(rows, labels, method, 0..rows.cols(), seed)
}

/// Rebalances a labeled table. Resampling methods equalize the two classes
/// (shrinking the majority or growing the minority); `Reweight` keeps every
/// row and gives positives weight `#neg / #pos`. SMOTE measures Euclidean
/// distance on `metric_cols` only but interpolates whole rows.
pub fn rebalance_with(
    rows: &Matrix,
    labels: &[u8],
    method: Sampling,
    metric_cols: Range<usize>,
    seed: u64,
) -> Result<Rebalanced> {
    if rows.rows() != labels.len() {
        return Err(Error::DimMismatch {
            expected: rows.rows(),
            got: labels.len(),
        });
    }
    if metric_cols.end > rows.cols() {
        return Err(Error::invalid("SMOTE metric columns exceed row width"));
    }
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    if pos.len() + neg.len() != labels.len() {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    if method != Sampling::None && (pos.is_empty() || neg.is_empty()) {
        return Err(Error::invalid("rebalancing needs both classes present"));
    }
    let mut rng = seed::rng(seed::derive(seed, "rebalance"));
    let (minority, majority, minority_label) = if pos.len() <= neg.len() {
        (&pos, &neg, 1u8)
    } else {
        (&neg, &pos, 0u8)
    };
    let deficit = majority.len() - minority.len();

    let unit = |rows: Matrix, labels: Vec<u8>| {
        let n = labels.len();
        Rebalanced {
            rows,
            labels,
            weights: vec![1.0; n],
        }
    };

    match method {
        Sampling::None => Ok(unit(rows.clone(), labels.to_vec())),
        Sampling::Reweight => {
            let w_pos = neg.len() as f64 / pos.len() as f64;
            let weights = labels
                .iter()
                .map(|&l| if l == 1 { w_pos } else { 1.0 })
                .collect();
            Ok(Rebalanced {
                rows: rows.clone(),
                labels: labels.to_vec(),
                weights,
            })
        }
        Sampling::RandomUnder => {
            let picked = index::sample(&mut rng, majority.len(), minority.len());
            let mut keep: Vec<usize> = minority
                .iter()
                .copied()
                .chain(picked.iter().map(|k| majority[k]))
                .collect();
            keep.sort_unstable();
            let labels = keep.iter().map(|&i| labels[i]).collect();
            Ok(unit(rows.select_rows(&keep), labels))
        }
        Sampling::RandomOver => {
            let mut out = rows.clone();
            let mut out_labels = labels.to_vec();
            for _ in 0..deficit {
                let i = *minority.choose(&mut rng).expect("nonempty");
                out.push_row(rows.row(i))?;
                out_labels.push(minority_label);
            }
            Ok(unit(out, out_labels))
        }
        Sampling::Smote => {
            if minority.len() < 2 {
                return Err(Error::invalid("SMOTE needs at least two minority rows"));
            }
            let k = SMOTE_K.min(minority.len() - 1);
            let neighbors = knn_within(rows, minority, k, &metric_cols);
            let mut out = rows.clone();
            let mut out_labels = labels.to_vec();
            let mut synth = vec![0.0; rows.cols()];
            for s in 0..deficit {
                let a = s % minority.len();
                let b = neighbors[a][rng.random_range(0..k)];
                let u: f64 = rng.random();
                let (p, q) = (rows.row(minority[a]), rows.row(minority[b]));
                for (j, v) in synth.iter_mut().enumerate() {
                    *v = p[j] + u * (q[j] - p[j]);
                }
                out.push_row(&synth)?;
                out_labels.push(minority_label);
            }
            Ok(unit(out, out_labels))
        }
    }
}

/// For each member of `set`, positions (within `set`) of its k nearest other members.
fn knn_within(rows: &Matrix, set: &[usize], k: usize, cols: &Range<usize>) -> Vec<Vec<usize>> {
    let dist = |a: usize, b: usize| -> f64 {
        let (ra, rb) = (rows.row(a), rows.row(b));
        cols.clone().map(|j| (ra[j] - rb[j]).powi(2)).sum()
    };
    set.iter()
        .enumerate()
        .map(|(a, &ia)| {
            let mut d: Vec<(f64, usize)> = set
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &ib)| (dist(ia, ib), b))
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.truncate(k);
            d.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_pos: usize, n_neg: usize) -> (Matrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_pos {
            rows.push(vec![i as f64, (i * i) as f64 * 0.5, 1.0]);
            labels.push(1);
        }
        for i in 0..n_neg {
            rows.push(vec![-(i as f64), 3.0, (i % 7) as f64]);
            labels.push(0);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    fn counts(l: &[u8]) -> (usize, usize) {
        let p = l.iter().filter(|&&x| x == 1).count();
        (p, l.len() - p)
    }

    #[test]
    fn balanced_input_stays_balanced() {
        let (m, l) = toy(6, 6);
        for method in [
            Sampling::RandomUnder,
            Sampling::RandomOver,
            Sampling::Smote,
            Sampling::Reweight,
        ] {
            let out = rebalance(&m, &l, method, 1).unwrap();
            let (p, n) = counts(&out.labels);
            assert_eq!(p, n, "{method:?}");
            if method == Sampling::Reweight {
                assert!(out.weights.iter().all(|&w| w == 1.0));
            }
        }
    }

    #[test]
    fn reweight_ratio() {
        let (m, l) = toy(2, 200);
        let out = rebalance(&m, &l, Sampling::Reweight, 0).unwrap();
        assert_eq!(out.rows, m);
        assert_eq!(out.labels, l);
        assert_eq!(out.weights[0], 100.0);
        assert_eq!(out.weights[5], 1.0);
    }

    #[test]
    fn under_and_over_equalize() {
        let (m, l) = toy(5, 40);
        let under = rebalance(&m, &l, Sampling::RandomUnder, 2).unwrap();
        assert_eq!(counts(&under.labels), (5, 5));
        let over = rebalance(&m, &l, Sampling::RandomOver, 2).unwrap();
        assert_eq!(counts(&over.labels), (40, 40));
        for i in 45..80 {
            let r = over.rows.row(i);
            assert!((0..5).any(|p| m.row(p) == r));
        }
    }

    #[test]
    fn smote_points_lie_on_segments() {
        let (m, l) = toy(7, 60);
        let out = rebalance(&m, &l, Sampling::Smote, 4).unwrap();
        assert_eq!(counts(&out.labels), (60, 60));
        let positives: Vec<&[f64]> = (0..7).map(|i| m.row(i)).collect();
        for s in 67..out.rows.rows() {
            let s = out.rows.row(s);
            let on_some_segment = positives.iter().any(|p| {
                positives.iter().any(|q| {
                    if p == q {
                        return false;
                    }
                    // single u consistent across all coordinates
                    let j = (0..3).find(|&j| (q[j] - p[j]).abs() > 1e-12).unwrap();
                    let u = (s[j] - p[j]) / (q[j] - p[j]);
                    (-1e-9..=1.0 + 1e-9).contains(&u)
                        && (0..3).all(|j| (p[j] + u * (q[j] - p[j]) - s[j]).abs() < 1e-9)
                })
            });
            assert!(on_some_segment, "{s:?}");
        }
    }

    #[test]
    fn errors() {
        let (m, l) = toy(1, 10);
        assert!(rebalance(&m, &l, Sampling::Smote, 0).is_err());
        let (m, l) = toy(0, 10);
        assert!(rebalance(&m, &l, Sampling::Reweight, 0).is_err());
    }
}
