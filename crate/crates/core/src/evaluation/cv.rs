use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, Metrics};
use crate::classifiers::{train, vectors_from_manifest, Classifier, FeatureVector, ModelParams, Prediction};
use crate::config::PipelineConfig;
use crate::dataset::{stratified_folds, DatasetManifest, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub fold_of: Vec<usize>,
    /// Held-out prediction for every sample, in input order.
    pub predictions: Vec<Prediction>,
    /// Sorted by fold index.
    pub folds: Vec<FoldResult>,
    pub pooled: ConfusionMatrix,
}

impl CvOutcome {
    pub fn fold_accuracy_mean_std(&self) -> (f64, f64) {
        let accs: Vec<f64> = self.folds.iter().map(|f| f.metrics.accuracy).collect();
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let var = accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        (mean, var.sqrt())
    }
}

/// Stratified k-fold cross-validation over pooled vectors. Within each fold
/// one model per letter is trained on that letter's training vectors, and
/// each held-out vector is scored by the model of its own letter.
pub fn cross_validate_vectors<M, F>(data: &[FeatureVector], k: usize, seed: u64, train_fn: F) -> Result<CvOutcome>
where
    M: Classifier,
    F: Fn(&[FeatureVector]) -> Result<M> + Sync,
{
    let keys: Vec<(&str, Label)> = data.iter().map(|v| (v.letter.as_str(), v.label)).collect();
    let fold_of = stratified_folds(&keys, k, seed)?;

    let per_fold: Vec<Vec<(usize, Prediction)>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let mut train_by_letter: BTreeMap<&str, Vec<FeatureVector>> = BTreeMap::new();
            let mut test_by_letter: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, v) in data.iter().enumerate() {
                if fold_of[i] == fold {
                    test_by_letter.entry(&v.letter).or_default().push(i);
                } else {
                    train_by_letter.entry(&v.letter).or_default().push(v.clone());
                }
            }
            let mut out = Vec::new();
            for (letter, test) in test_by_letter {
                let train_set = train_by_letter
                    .get(letter)
                    .ok_or_else(|| Error::InvalidParameter(format!("no training data for letter {letter:?}")))?;
                let model = train_fn(train_set)?;
                for i in test {
                    out.push((i, model.predict(&data[i].values)?));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut predictions = vec![None; data.len()];
    let mut folds = Vec::with_capacity(k);
    for (fold, preds) in per_fold.into_iter().enumerate() {
        let mut cm = ConfusionMatrix::default();
        for &(i, p) in &preds {
            cm.record(p.label, data[i].label);
            predictions[i] = Some(p);
        }
        folds.push(FoldResult {
            fold,
            n: preds.len(),
            confusion: cm,
            metrics: cm.metrics(),
        });
    }
    let pooled = folds
        .iter()
        .fold(ConfusionMatrix::default(), |acc, f| acc.merge(&f.confusion));
    Ok(CvOutcome {
        fold_of,
        predictions: predictions
            .into_iter()
            .map(|p| p.expect("every sample is held out once"))
            .collect(),
        folds,
        pooled,
    })
}

/// Cross-validates one model configuration on already pooled vectors.
pub fn evaluate_vectors(
    data: &[FeatureVector],
    params: &ModelParams,
    k: usize,
    seed: u64,
) -> Result<super::ModelEvaluation> {
    let outcome = cross_validate_vectors(data, k, seed, |d| train(d, params))?;
    Ok(super::ModelEvaluation::from_outcome(params, k, seed, &outcome))
}

/// Extracts features for the manifest and cross-validates one model.
pub fn cross_validate(
    manifest: &DatasetManifest,
    cfg: &PipelineConfig,
    params: &ModelParams,
    k: usize,
    seed: u64,
) -> Result<super::ModelEvaluation> {
    let data = vectors_from_manifest(manifest, cfg)?;
    evaluate_vectors(&data, params, k, seed)
}
