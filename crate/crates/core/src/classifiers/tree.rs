//! Binary CART with Gini impurity.

use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::dataset::Label;

/// `1 - sum_c p_c^2` for a two-class node.
pub fn gini(correct: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = correct as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Samples with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
        /// Fraction of Correct training samples in the leaf.
        score: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Node 0 is the root; children always have larger indices.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn predict(&self, x: &[f64]) -> Prediction {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { label, score, .. } => {
                    return Prediction {
                        label: *label,
                        score: *score,
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [Label],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

pub fn fit(rows: &[Vec<f64>], labels: &[Label], max_depth: usize, min_leaf: usize) -> TreeModel {
    let mut b = Builder {
        rows,
        labels,
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    b.grow(&all, 0);
    TreeModel { nodes: b.nodes }
}

impl Builder<'_> {
    fn correct_in(&self, idx: &[usize]) -> usize {
        idx.iter().filter(|&&i| self.labels[i] == Label::Correct).count()
    }

    fn leaf(&self, idx: &[usize]) -> Node {
        let correct = self.correct_in(idx);
        Node::Leaf {
            label: if 2 * correct > idx.len() {
                Label::Correct
            } else {
                Label::Incorrect
            },
            score: correct as f64 / idx.len() as f64,
            count: idx.len(),
        }
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(self.leaf(idx));
        let correct = self.correct_in(idx);
        let pure = correct == 0 || correct == idx.len();
        if pure || depth >= self.max_depth || idx.len() < 2 * self.min_leaf {
            return at;
        }
        let Some((feature, threshold, impurity)) = self.best_split(idx) else {
            return at;
        };
        if impurity >= gini(correct, idx.len()) {
            return at;
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][feature] <= threshold);
        let left = self.grow(&left_idx, depth + 1);
        let right = self.grow(&right_idx, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }

    /// Lowest weighted Gini over all features and midpoints between
    /// consecutive distinct values; earliest feature/threshold wins ties.
    fn best_split(&self, idx: &[usize]) -> Option<(usize, f64, f64)> {
        let n = idx.len();
        let total_correct = self.correct_in(idx);
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = idx.to_vec();
        for feature in 0..self.rows[idx[0]].len() {
            sorted.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
            let mut left_correct = 0;
            for pos in 1..n {
                if self.labels[sorted[pos - 1]] == Label::Correct {
                    left_correct += 1;
                }
                let (lo, hi) = (self.rows[sorted[pos - 1]][feature], self.rows[sorted[pos]][feature]);
                if lo == hi || pos < self.min_leaf || n - pos < self.min_leaf {
                    continue;
                }
                let impurity = (pos as f64 * gini(left_correct, pos)
                    + (n - pos) as f64 * gini(total_correct - left_correct, n - pos))
                    / n as f64;
                if best.is_none_or(|(_, _, b)| impurity < b) {
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some((feature, mid, impurity));
                }
            }
        }
        best
    }
}
