use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::dataset::Label;

/// Stored training set, already standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl KnnModel {
    /// Majority of the `k` nearest stored vectors by Euclidean distance
    /// (equal distances resolve to the earlier training index). The score is
    /// the fraction of Correct votes; a tied vote is Incorrect.
    pub fn predict(&self, query: &[f64]) -> Prediction {
        let mut order: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (squared_distance(v, query), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let correct = order[..self.k]
            .iter()
            .filter(|(_, i)| self.labels[*i] == Label::Correct)
            .count();
        let label = if 2 * correct > self.k {
            Label::Correct
        } else {
            Label::Incorrect
        };
        Prediction {
            label,
            score: correct as f64 / self.k as f64,
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
