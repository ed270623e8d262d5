//! Gradient boosted regression trees for the binary logistic loss.
//!
//! Trees grow depth-wise with exact greedy splits. Each feature is sorted
//! once; every level then walks those orders and accumulates gradient and
//! hessian sums per open node. Leaf values are shrunken Newton steps.

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_classes, sigmoid};
use crate::{Error, Result};

/// Keeps Newton denominators away from zero when predictions saturate.
const HESSIAN_FLOOR: f64 = 1e-12;
/// Gains closer than this (relative to the node score) count as ties.
/// Zero-gain splits are admitted, as with a minimum impurity decrease of 0,
/// so symmetric patterns such as XOR can still be split.
const GAIN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmConfig {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Recorded for reproducibility; exact greedy training draws no random
    /// numbers.
    pub seed: u64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            n_estimators: 100,
            max_depth: 3,
            min_samples_leaf: 20,
            seed: 42,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.n_estimators == 0 || self.max_depth == 0 {
            return Err(Error::InvalidConfig(
                "n_estimators and max_depth must be >= 1".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Regression tree; node 0 is the root. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, row: ArrayView1<'_, f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    pub config: GbmConfig,
    pub width: usize,
    /// Log-odds of the training positive rate.
    pub prior: f64,
    pub trees: Vec<Tree>,
    /// Mean training log loss before the first tree and after each tree.
    pub loss_trace: Vec<f64>,
}

impl GbmModel {
    pub fn decision(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.prior + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| sigmoid(self.decision(r))).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    grad: f64,
    hess: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.grad += g;
        self.hess += h;
        self.count += 1;
    }

    fn score(&self) -> f64 {
        self.grad * self.grad / (self.hess + HESSIAN_FLOOR)
    }

    fn minus(&self, other: &Stats) -> Stats {
        Stats {
            grad: self.grad - other.grad,
            hess: self.hess - other.hess,
            count: self.count - other.count,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

pub fn fit(x: ArrayView2<'_, f64>, y: &[u8], cfg: &GbmConfig) -> Result<GbmModel> {
    cfg.validate()?;
    let (n, width) = x.dim();
    if n != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: n,
        });
    }
    check_classes(y)?;

    let positives = y.iter().filter(|&&t| t == 1).count() as f64;
    let rate = positives / n as f64;
    let prior = (rate / (1.0 - rate)).ln();

    // Every feature's rows sorted by value, ties by row index.
    let sorted: Vec<Vec<usize>> = (0..width)
        .into_par_iter()
        .map(|f| {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
            order
        })
        .collect();

    let mut raw = vec![prior; n];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    let mut loss_trace = vec![mean_log_loss(&raw, y)];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..cfg.n_estimators {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - f64::from(y[i]);
            hess[i] = p * (1.0 - p);
        }
        let (tree, leaf_of) = grow_tree(x, &sorted, &grad, &hess, cfg);
        for (r, &leaf) in raw.iter_mut().zip(&leaf_of) {
            if let TreeNode::Leaf { value } = tree.nodes[leaf] {
                *r += value;
            }
        }
        loss_trace.push(mean_log_loss(&raw, y));
        trees.push(tree);
    }

    Ok(GbmModel {
        config: *cfg,
        width,
        prior,
        trees,
        loss_trace,
    })
}

/// Returns the tree and the leaf index of every training row.
fn grow_tree(
    x: ArrayView2<'_, f64>,
    sorted: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    cfg: &GbmConfig,
) -> (Tree, Vec<usize>) {
    let n = grad.len();
    let mut node_of = vec![0usize; n];
    let mut stats = vec![Stats::default()];
    for i in 0..n {
        stats[0].add(grad[i], hess[i]);
    }
    // Nodes are leaves until split; `None` marks a pending leaf.
    let mut splits: Vec<Option<(usize, f64, usize, usize)>> = vec![None];
    let mut open = vec![0usize];

    for _ in 0..cfg.max_depth {
        open.retain(|&q| stats[q].count >= 2 * cfg.min_samples_leaf);
        if open.is_empty() {
            break;
        }
        let best = best_splits(x, sorted, grad, hess, &node_of, &stats, &open, cfg.min_samples_leaf);

        let mut next_open = Vec::new();
        let mut child_of = vec![None; stats.len()];
        for (&q, cand) in open.iter().zip(best) {
            let Some(c) = cand else { continue };
            let left = stats.len();
            stats.push(Stats::default());
            stats.push(Stats::default());
            splits.push(None);
            splits.push(None);
            splits[q] = Some((c.feature, c.threshold, left, left + 1));
            child_of[q] = Some((c.feature, c.threshold, left));
            next_open.push(left);
            next_open.push(left + 1);
        }
        if next_open.is_empty() {
            break;
        }
        for i in 0..n {
            if let Some((f, thr, left)) = child_of[node_of[i]] {
                let child = if x[[i, f]] <= thr { left } else { left + 1 };
                node_of[i] = child;
                stats[child].add(grad[i], hess[i]);
            }
        }
        open = next_open;
    }

    let nodes = splits
        .iter()
        .zip(&stats)
        .map(|(split, s)| match *split {
            Some((feature, threshold, left, right)) => TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            },
            None => TreeNode::Leaf {
                value: -cfg.learning_rate * s.grad / (s.hess + HESSIAN_FLOOR),
            },
        })
        .collect();
    (Tree { nodes }, node_of)
}

/// Best split for each open node, or `None` when no split has non-negative
/// gain under the leaf-size constraint. Ties go to the lower feature, then to the
/// lower threshold.
#[allow(clippy::too_many_arguments)]
fn best_splits(
    x: ArrayView2<'_, f64>,
    sorted: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    node_of: &[usize],
    stats: &[Stats],
    open: &[usize],
    min_leaf: usize,
) -> Vec<Option<Candidate>> {
    // Dense slot per open node.
    let mut slot = vec![usize::MAX; stats.len()];
    for (s, &q) in open.iter().enumerate() {
        slot[q] = s;
    }

    let per_feature: Vec<Vec<Option<Candidate>>> = sorted
        .par_iter()
        .enumerate()
        .map(|(f, order)| {
            let mut left = vec![Stats::default(); open.len()];
            let mut last = vec![f64::NAN; open.len()];
            let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
            for &i in order {
                let s = slot[node_of[i]];
                if s == usize::MAX {
                    continue;
                }
                let v = x[[i, f]];
                let total = &stats[open[s]];
                let l = left[s];
                if l.count >= min_leaf && total.count - l.count >= min_leaf && v > last[s] {
                    let r = total.minus(&l);
                    let gain = l.score() + r.score() - total.score();
                    let tol = tie_tolerance(total);
                    if gain >= -tol && best[s].is_none_or(|b| gain > b.gain + tol) {
                        let a = last[s];
                        let mut threshold = a + (v - a) / 2.0;
                        if !(threshold < v) {
                            threshold = a;
                        }
                        best[s] = Some(Candidate {
                            gain,
                            feature: f,
                            threshold,
                        });
                    }
                }
                left[s].add(grad[i], hess[i]);
                last[s] = v;
            }
            best
        })
        .collect();

    let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
    for cands in per_feature {
        for ((b, c), &q) in best.iter_mut().zip(cands).zip(open) {
            if let Some(c) = c {
                let tol = tie_tolerance(&stats[q]);
                if b.is_none_or(|cur| c.gain > cur.gain + tol) {
                    *b = Some(c);
                }
            }
        }
    }
    best
}

fn tie_tolerance(node: &Stats) -> f64 {
    GAIN_TOLERANCE * (1.0 + node.score().abs())
}

fn mean_log_loss(raw: &[f64], y: &[u8]) -> f64 {
    raw.iter()
        .zip(y)
        .map(|(&z, &t)| {
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - f64::from(t) * z
        })
        .sum::<f64>()
        / raw.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    /// Four noiseless clusters of 50 lattice points each.
    fn xor_clusters() -> (Array2<f64>, Vec<u8>) {
        let centers = [(0.0, 0.0, 0), (1.0, 1.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1)];
        let mut data = Vec::new();
        let mut y = Vec::new();
        for &(cx, cy, label) in &centers {
            for k in 0..50 {
                data.push(cx + (k % 5) as f64 * 0.05);
                data.push(cy + (k / 5) as f64 * 0.02);
                y.push(label);
            }
        }
        (Array2::from_shape_vec((200, 2), data).unwrap(), y)
    }

    #[test]
    fn learns_xor() {
        let (x, y) = xor_clusters();
        let m = fit(x.view(), &y, &GbmConfig::default()).unwrap();
        let p = m.predict_proba(x.view());
        let acc = p
            .iter()
            .zip(&y)
            .filter(|(&p, &t)| (p >= 0.5) == (t == 1))
            .count() as f64
            / 200.0;
        assert!(acc >= 0.95, "accuracy {acc}");
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn training_loss_decreases() {
        let (x, y) = xor_clusters();
        let m = fit(x.view(), &y, &GbmConfig { learning_rate: 0.1, ..GbmConfig::default() }).unwrap();
        for w in m.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn tiny_learning_rate_stays_at_prior() {
        let (x, y) = xor_clusters();
        let cfg = GbmConfig {
            learning_rate: 1e-12,
            n_estimators: 1,
            ..GbmConfig::default()
        };
        let m = fit(x.view(), &y, &cfg).unwrap();
        for p in m.predict_proba(x.view()) {
            assert!((p - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_trees_predict_positive_rate() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = [1, 0, 0, 0];
        let mut m = fit(x.view(), &y, &GbmConfig::default()).unwrap();
        m.trees.clear();
        for p in m.predict_proba(x.view()) {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic() {
        let (x, y) = xor_clusters();
        let a = fit(x.view(), &y, &GbmConfig::default()).unwrap();
        let b = fit(x.view(), &y, &GbmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leaf_size_respected() {
        let (x, y) = xor_clusters();
        let cfg = GbmConfig {
            min_samples_leaf: 60,
            n_estimators: 3,
            ..GbmConfig::default()
        };
        let m = fit(x.view(), &y, &cfg).unwrap();
        for tree in &m.trees {
            // Every leaf must hold at least 60 of the 200 training rows.
            let mut counts = vec![0usize; tree.nodes.len()];
            for row in x.rows() {
                let mut at = 0;
                while let TreeNode::Split { feature, threshold, left, right } = tree.nodes[at] {
                    at = if row[feature] <= threshold { left } else { right };
                }
                counts[at] += 1;
            }
            for (i, node) in tree.nodes.iter().enumerate() {
                if matches!(node, TreeNode::Leaf { .. }) {
                    assert!(counts[i] >= 60);
                }
            }
        }
    }
}
