//! Linear SVM trained by full-batch subgradient descent on the regularized
//! hinge loss, step `1 / (lambda t)`, with the iterate projected onto the
//! ball of radius `1 / sqrt(lambda)`. The bias is a constant-one feature
//! regularized with the weights.

use serde::{Deserialize, Serialize};

use super::Prediction;
use crate::dataset::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let m = self.margin(x);
        Prediction {
            label: if m > 0.0 { Label::Correct } else { Label::Incorrect },
            score: 1.0 / (1.0 + (-m).exp()),
        }
    }
}

fn sign(label: Label) -> f64 {
    match label {
        Label::Correct => 1.0,
        Label::Incorrect => -1.0,
    }
}

/// `rows` are standardized feature vectors.
pub fn fit(rows: &[Vec<f64>], labels: &[Label], lambda: f64, epochs: usize) -> SvmModel {
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let radius = 1.0 / lambda.sqrt();
    // last slot is the bias weight
    let mut w = vec![0.0; dim + 1];
    let mut grad = vec![0.0; dim + 1];
    for t in 1..=epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, &label) in rows.iter().zip(labels) {
            let y = sign(label);
            let score = x.iter().zip(&w).map(|(v, wi)| v * wi).sum::<f64>() + w[dim];
            if y * score < 1.0 {
                for (g, v) in grad.iter_mut().zip(x) {
                    *g += y * v;
                }
                grad[dim] += y;
            }
        }
        let eta = 1.0 / (lambda * t as f64);
        let shrink = 1.0 - eta * lambda;
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi = shrink * *wi + eta * g / n;
        }
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            let s = radius / norm;
            w.iter_mut().for_each(|v| *v *= s);
        }
    }
    let bias = w.pop().unwrap_or(0.0);
    SvmModel { weights: w, bias }
}
