//! Gradient-boosted trees with logistic loss, second-order leaf values and
//! exact greedy, depth-limited splits.

use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, softplus};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian mass per child.
    pub min_child_weight: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            rounds: 50,
            max_depth: 4,
            learning_rate: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0usize;
        loop {
            match &self.nodes[k] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    k = if x[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    fn scale_leaves(&mut self, k: f64) {
        for n in &mut self.nodes {
            if let TreeNode::Leaf { value } = n {
                *value *= k;
            }
        }
    }

    /// Feature used at the root, if the tree splits at all.
    pub fn root_feature(&self) -> Option<usize> {
        match self.nodes.first()? {
            TreeNode::Split { feature, .. } => Some(*feature),
            TreeNode::Leaf { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    pub n_features: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl Gbdt {
    pub fn empty(n_features: usize) -> Self {
        Gbdt {
            n_features,
            base_score: 0.0,
            trees: Vec::new(),
        }
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    gl: f64,
    hl: f64,
}

#[derive(Clone, Copy, Default)]
struct Running {
    gl: f64,
    hl: f64,
    last: f64,
    seen: bool,
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn split_score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

struct Grower<'a> {
    cols: &'a [Vec<f64>],
    sorted: &'a [Vec<u32>],
    cfg: &'a GbdtConfig,
}

impl Grower<'_> {
    fn grow(&self, active: &[u32], g: &[f64], h: &[f64]) -> Tree {
        let lambda = self.cfg.lambda;
        let n = g.len();
        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let (g0, h0) = active
            .iter()
            .fold((0.0, 0.0), |(a, b), &i| (a + g[i as usize], b + h[i as usize]));
        let mut stats = vec![(g0, h0)];
        let mut node_of = vec![u32::MAX; n];
        for &i in active {
            node_of[i as usize] = 0;
        }
        let mut frontier: Vec<u32> = vec![0];

        for _depth in 0..self.cfg.max_depth {
            if frontier.is_empty() {
                break;
            }
            let mut slot_of = vec![usize::MAX; nodes.len()];
            for (s, &node) in frontier.iter().enumerate() {
                slot_of[node as usize] = s;
            }
            let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
            let mut run = vec![Running::default(); frontier.len()];
            for (f, order) in self.sorted.iter().enumerate() {
                let col = &self.cols[f];
                run.iter_mut().for_each(|r| *r = Running::default());
                for &i in order {
                    let i = i as usize;
                    let node = node_of[i];
                    if node == u32::MAX {
                        continue;
                    }
                    let s = slot_of[node as usize];
                    if s == usize::MAX {
                        continue;
                    }
                    let v = col[i];
                    let r = &mut run[s];
                    if r.seen && v > r.last {
                        let (gt, ht) = stats[node as usize];
                        let (gr, hr) = (gt - r.gl, ht - r.hl);
                        if r.hl >= self.cfg.min_child_weight && hr >= self.cfg.min_child_weight {
                            let gain = split_score(r.gl, r.hl, lambda)
                                + split_score(gr, hr, lambda)
                                - split_score(gt, ht, lambda);
                            if best[s].is_none_or(|b| gain > b.gain) {
                                let mut threshold = 0.5 * (r.last + v);
                                if threshold >= v {
                                    threshold = r.last;
                                }
                                best[s] = Some(Candidate {
                                    gain,
                                    feature: f,
                                    threshold,
                                    gl: r.gl,
                                    hl: r.hl,
                                });
                            }
                        }
                    }
                    r.gl += g[i];
                    r.hl += h[i];
                    r.last = v;
                    r.seen = true;
                }
            }

            let mut next = Vec::new();
            let mut split_of: Vec<Option<(usize, f64, u32, u32)>> = vec![None; nodes.len()];
            for (s, &node) in frontier.iter().enumerate() {
                let Some(c) = best[s] else { continue };
                if c.gain <= 1e-12 {
                    continue;
                }
                let (gt, ht) = stats[node as usize];
                let left = nodes.len() as u32;
                let right = left + 1;
                nodes.push(TreeNode::Leaf { value: 0.0 });
                nodes.push(TreeNode::Leaf { value: 0.0 });
                stats.push((c.gl, c.hl));
                stats.push((gt - c.gl, ht - c.hl));
                nodes[node as usize] = TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                split_of[node as usize] = Some((c.feature, c.threshold, left, right));
                next.push(left);
                next.push(right);
            }
            for &i in active {
                let i = i as usize;
                let node = node_of[i] as usize;
                if let Some((f, thr, l, r)) = split_of.get(node).copied().flatten() {
                    node_of[i] = if self.cols[f][i] <= thr { l } else { r };
                }
            }
            frontier = next;
        }

        for (k, node) in nodes.iter_mut().enumerate() {
            if let TreeNode::Leaf { value } = node {
                let (gs, hs) = stats[k];
                *value = self.cfg.learning_rate * leaf_weight(gs, hs, lambda);
            }
        }
        Tree { nodes }
    }
}

fn weighted_logloss(margins: &[f64], y: &[f64], w: &[f64]) -> f64 {
    margins
        .iter()
        .zip(y)
        .zip(w)
        .map(|((m, y), w)| if *w == 0.0 { 0.0 } else { w * (softplus(*m) - y * m) })
        .sum()
}

/// Fits a boosted ensemble. Inputs are assumed validated (finite, both
/// classes present); rows with zero weight are ignored entirely.
pub fn train_gbdt(x: &Matrix, y: &[f64], w: Option<&[f64]>, cfg: &GbdtConfig) -> Gbdt {
    let n = x.rows();
    let d = x.cols();
    let weights: Vec<f64> = w.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let active: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > 0.0).collect();
    let cols: Vec<Vec<f64>> = (0..d).map(|f| x.column(f)).collect();
    let sorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|col| {
            let mut idx = active.clone();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let grower = Grower {
        cols: &cols,
        sorted: &sorted,
        cfg,
    };

    let mut model = Gbdt::empty(d);
    let mut margins = vec![model.base_score; n];
    let mut loss = weighted_logloss(&margins, y, &weights);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut trial = vec![0.0; n];
    for _ in 0..cfg.rounds {
        for &i in &active {
            let i = i as usize;
            let p = sigmoid(margins[i]);
            g[i] = weights[i] * (p - y[i]);
            h[i] = weights[i] * p * (1.0 - p);
        }
        let mut tree = grower.grow(&active, &g, &h);
        let deltas: Vec<f64> = (0..n).map(|i| tree.predict(x.row(i))).collect();
        // a Newton step can overshoot; shrink the tree until the loss does not rise
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            for i in 0..n {
                trial[i] = margins[i] + scale * deltas[i];
            }
            let new_loss = weighted_logloss(&trial, y, &weights);
            if new_loss <= loss {
                loss = new_loss;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            continue;
        }
        if scale != 1.0 {
            tree.scale_leaves(scale);
        }
        std::mem::swap(&mut margins, &mut trial);
        model.trees.push(tree);
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ensemble_scores_half() {
        assert_eq!(Gbdt::empty(3).score(&[1.0, 2.0, 3.0]), 0.5);
    }

    #[test]
    fn stump_picks_separating_feature() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let noise = ((i * 37) % 11) as f64;
                vec![noise, (i % 3) as f64, noise * 0.5, if i < 20 { -1.0 } else { 1.0 }, 2.0]
            })
            .collect();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 1.0 }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = GbdtConfig {
            rounds: 1,
            max_depth: 1,
            ..GbdtConfig::default()
        };
        let m = train_gbdt(&x, &y, None, &cfg);
        assert_eq!(m.trees.len(), 1);
        assert_eq!(m.trees[0].root_feature(), Some(3));
        assert!(matches!(m.trees[0].nodes[0], TreeNode::Split { threshold, .. } if threshold == 0.0));
    }
}
