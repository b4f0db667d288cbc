use serde::{Deserialize, Serialize};

use super::{train, FeatureVector, ModelParams};
use crate::error::{Error, Result};
use crate::evaluation::cross_validate_vectors;

/// Candidate parameter sets for one model kind, in evaluation order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub points: Vec<ModelParams>,
}

impl ParamGrid {
    pub fn knn(ks: &[usize]) -> Self {
        Self {
            points: ks.iter().map(|&k| ModelParams::Knn { k }).collect(),
        }
    }

    pub fn svm(lambdas: &[f64], epochs: &[usize], seed: u64) -> Self {
        let points = lambdas
            .iter()
            .flat_map(|&lambda| {
                epochs
                    .iter()
                    .map(move |&epochs| ModelParams::Svm { lambda, epochs, seed })
            })
            .collect();
        Self { points }
    }

    pub fn tree(depths: &[usize], min_leaves: &[usize]) -> Self {
        let points = depths
            .iter()
            .flat_map(|&max_depth| {
                min_leaves
                    .iter()
                    .map(move |&min_leaf| ModelParams::Tree { max_depth, min_leaf })
            })
            .collect();
        Self { points }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: ModelParams,
    /// One entry per fold; empty when training failed for this point.
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: ModelParams,
    pub best_index: usize,
    pub rows: Vec<GridRow>,
}

/// Cross-validates every grid point on the same folds and returns the point
/// with the highest mean fold accuracy (earliest point on ties). A point whose
/// training fails is recorded with its error and cannot win.
pub fn grid_search(data: &[FeatureVector], grid: &ParamGrid, folds: usize, seed: u64) -> Result<GridSearchResult> {
    if grid.points.is_empty() {
        return Err(Error::InvalidParameter("parameter grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(grid.points.len());
    let mut last_error = None;
    for params in &grid.points {
        params.validate()?;
        match cross_validate_vectors(data, folds, seed, |d| train(d, params)) {
            Ok(out) => {
                let accs: Vec<f64> = out.folds.iter().map(|f| f.metrics.accuracy).collect();
                rows.push(GridRow {
                    params: *params,
                    mean_accuracy: Some(out.fold_accuracy_mean_std().0),
                    fold_accuracies: accs,
                    error: None,
                });
            }
            Err(e @ (Error::StratumTooSmall { .. } | Error::InvalidParameter(_))) => return Err(e),
            Err(e) => {
                rows.push(GridRow {
                    params: *params,
                    fold_accuracies: Vec::new(),
                    mean_accuracy: None,
                    error: Some(e.to_string()),
                });
                last_error = Some(e);
            }
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some(acc) = row.mean_accuracy {
            if best.is_none_or(|(_, b)| acc > b) {
                best = Some((i, acc));
            }
        }
    }
    match best {
        Some((best_index, _)) => Ok(GridSearchResult {
            best: rows[best_index].params,
            best_index,
            rows,
        }),
        None => Err(last_error.expect("a failed row recorded its error")),
    }
}
