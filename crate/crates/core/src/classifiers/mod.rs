//! Fixed-length pooling of MFCC matrices and three binary classifiers
//! (k-nearest neighbours, linear SVM, CART decision tree), each trained per
//! letter on standardized features.

mod grid;
mod knn;
mod persist;
mod scaler;
mod svm;
mod tree;

pub use grid::{grid_search, GridRow, GridSearchResult, ParamGrid};
pub use knn::KnnModel;
pub use persist::{load_model, model_from_json, model_to_json, save_model, MODEL_FILE_VERSION};
pub use scaler::Standardizer;
pub use svm::SvmModel;
pub use tree::{gini, Node, TreeModel};

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::dataset::{DatasetManifest, Label};
use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureMatrix};

/// Pooled clip descriptor: per-coefficient means followed by per-coefficient
/// population standard deviations (length `2C`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub letter: String,
    pub label: Label,
}

pub fn pool(m: &FeatureMatrix) -> Vec<f64> {
    let (f, c) = (m.frames() as f64, m.coeffs());
    let mut mean = vec![0.0; c];
    for row in m.rows() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= f);
    let mut var = vec![0.0; c];
    for row in m.rows() {
        for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    mean.extend(var.into_iter().map(|s| (s / f).sqrt()));
    mean
}

/// Extracts and pools MFCCs for every sample, in manifest order.
pub fn vectors_from_manifest(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    let extractor = FeatureExtractor::new(cfg)?;
    manifest
        .samples
        .par_iter()
        .map(|s| {
            let path = manifest.resolve(s);
            let clip = crate::audio::load_wav(&path)?;
            let feats = extractor.extract_any_rate(&clip).map_err(|e| Error::Sample {
                path: path.clone(),
                source: Box::new(e),
            })?;
            Ok(FeatureVector {
                values: pool(&feats.mfcc),
                letter: s.letter.clone(),
                label: s.label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Probability-like confidence that the pronunciation is Correct, in `[0, 1]`.
    pub score: f64,
}

/// Anything that labels a raw (unstandardized) feature vector.
pub trait Classifier {
    fn predict(&self, values: &[f64]) -> Result<Prediction>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Svm,
    Tree,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Knn, ModelKind::Svm, ModelKind::Tree];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Svm => "svm",
            ModelKind::Tree => "tree",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Knn => "KNN",
            ModelKind::Svm => "SVM",
            ModelKind::Tree => "Decision Tree",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "knn" => Ok(ModelKind::Knn),
            "svm" => Ok(ModelKind::Svm),
            "tree" | "dt" => Ok(ModelKind::Tree),
            other => Err(Error::InvalidParameter(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Knn { k: usize },
    Svm { lambda: f64, epochs: usize, seed: u64 },
    Tree { max_depth: usize, min_leaf: usize },
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Knn { .. } => ModelKind::Knn,
            ModelParams::Svm { .. } => ModelKind::Svm,
            ModelParams::Tree { .. } => ModelKind::Tree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            ModelParams::Knn { k } if k == 0 || k % 2 == 0 => bad(format!("k must be odd and positive, got {k}")),
            ModelParams::Svm { lambda, .. } if !(lambda.is_finite() && lambda > 0.0) => {
                bad(format!("lambda must be positive, got {lambda}"))
            }
            ModelParams::Svm { epochs: 0, .. } => bad("epochs must be positive".into()),
            ModelParams::Tree { max_depth: 0, .. } => bad("max_depth must be positive".into()),
            ModelParams::Tree { min_leaf: 0, .. } => bad("min_leaf must be positive".into()),
            _ => Ok(()),
        }
    }

    /// Parses `key=value` pairs separated by commas over `defaults` for `kind`,
    /// e.g. `k=5` or `lambda=0.01,epochs=300`.
    pub fn parse(kind: ModelKind, spec: &str, defaults: &ClassifierDefaults) -> Result<Self> {
        let mut params = defaults.params(kind);
        for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("expected key=value, got {pair:?}")))?;
            let bad = || Error::InvalidParameter(format!("bad value for {key}: {value:?}"));
            match (&mut params, key.trim()) {
                (ModelParams::Knn { k }, "k") => *k = value.parse().map_err(|_| bad())?,
                (ModelParams::Svm { lambda, .. }, "lambda") => *lambda = value.parse().map_err(|_| bad())?,
                (ModelParams::Svm { epochs, .. }, "epochs") => *epochs = value.parse().map_err(|_| bad())?,
                (ModelParams::Svm { seed, .. }, "seed") => *seed = value.parse().map_err(|_| bad())?,
                (ModelParams::Tree { max_depth, .. }, "max_depth") => *max_depth = value.parse().map_err(|_| bad())?,
                (ModelParams::Tree { min_leaf, .. }, "min_leaf") => *min_leaf = value.parse().map_err(|_| bad())?,
                (_, other) => {
                    return Err(Error::InvalidParameter(format!("unknown {kind} parameter {other:?}")))
                }
            }
        }
        params.validate()?;
        Ok(params)
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelParams::Knn { k } => write!(f, "k={k}"),
            ModelParams::Svm { lambda, epochs, seed } => write!(f, "lambda={lambda},epochs={epochs},seed={seed}"),
            ModelParams::Tree { max_depth, min_leaf } => write!(f, "max_depth={max_depth},min_leaf={min_leaf}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierDefaults {
    pub knn_k: usize,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub svm_seed: u64,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
}

impl Default for ClassifierDefaults {
    fn default() -> Self {
        Self {
            knn_k: 5,
            svm_lambda: 0.01,
            svm_epochs: 300,
            svm_seed: 42,
            tree_max_depth: 8,
            tree_min_leaf: 2,
        }
    }
}

impl ClassifierDefaults {
    pub fn params(&self, kind: ModelKind) -> ModelParams {
        match kind {
            ModelKind::Knn => ModelParams::Knn { k: self.knn_k },
            ModelKind::Svm => ModelParams::Svm {
                lambda: self.svm_lambda,
                epochs: self.svm_epochs,
                seed: self.svm_seed,
            },
            ModelKind::Tree => ModelParams::Tree {
                max_depth: self.tree_max_depth,
                min_leaf: self.tree_min_leaf,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        ModelKind::ALL
            .iter()
            .try_for_each(|&k| self.params(k).validate())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Knn(KnnModel),
    Svm(SvmModel),
    Tree(TreeModel),
}

/// A trained, immutable per-letter model with its feature scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub letter: String,
    pub params: ModelParams,
    pub scaler: Standardizer,
    pub body: ModelBody,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn dim(&self) -> usize {
        self.scaler.dim()
    }

    pub fn predict(&self, values: &[f64]) -> Result<Prediction> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: values.len(),
            });
        }
        let x = self.scaler.transform(values);
        Ok(match &self.body {
            ModelBody::Knn(m) => m.predict(&x),
            ModelBody::Svm(m) => m.predict(&x),
            ModelBody::Tree(m) => m.predict(&x),
        })
    }
}

impl Classifier for TrainedModel {
    fn predict(&self, values: &[f64]) -> Result<Prediction> {
        TrainedModel::predict(self, values)
    }
}

/// Checks shape and returns `(letter, standardizer, standardized rows, labels)`.
type Prepared = (String, Standardizer, Vec<Vec<f64>>, Vec<Label>);

fn prepare(data: &[FeatureVector]) -> Result<Prepared> {
    let first = data
        .first()
        .ok_or_else(|| Error::InvalidParameter("no training data".into()))?;
    let dim = first.values.len();
    if dim == 0 {
        return Err(Error::InvalidParameter("feature vectors are empty".into()));
    }
    for v in data {
        if v.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.values.len(),
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
    }
    let letter = if data.iter().all(|v| v.letter == first.letter) {
        first.letter.clone()
    } else {
        "*".to_string()
    };
    let scaler = Standardizer::fit(data.iter().map(|v| v.values.as_slice()));
    let rows = data.iter().map(|v| scaler.transform(&v.values)).collect();
    let labels = data.iter().map(|v| v.label).collect();
    Ok((letter, scaler, rows, labels))
}

pub fn train_knn(data: &[FeatureVector], k: usize) -> Result<TrainedModel> {
    let params = ModelParams::Knn { k };
    params.validate()?;
    if k > data.len() {
        return Err(Error::KTooLarge { k, n: data.len() });
    }
    let (letter, scaler, vectors, labels) = prepare(data)?;
    Ok(TrainedModel {
        letter,
        params,
        scaler,
        body: ModelBody::Knn(KnnModel { k, vectors, labels }),
    })
}

/// `seed` is recorded with the model; the full-batch solver itself draws no
/// random numbers.
pub fn train_linear_svm(data: &[FeatureVector], lambda: f64, epochs: usize, seed: u64) -> Result<TrainedModel> {
    let params = ModelParams::Svm { lambda, epochs, seed };
    params.validate()?;
    let (letter, scaler, rows, labels) = prepare(data)?;
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::SingleClass);
    }
    Ok(TrainedModel {
        letter,
        params,
        scaler,
        body: ModelBody::Svm(svm::fit(&rows, &labels, lambda, epochs)),
    })
}

pub fn train_decision_tree(data: &[FeatureVector], max_depth: usize, min_leaf: usize) -> Result<TrainedModel> {
    let params = ModelParams::Tree { max_depth, min_leaf };
    params.validate()?;
    let (letter, scaler, rows, labels) = prepare(data)?;
    Ok(TrainedModel {
        letter,
        params,
        scaler,
        body: ModelBody::Tree(tree::fit(&rows, &labels, max_depth, min_leaf)),
    })
}

pub fn train(data: &[FeatureVector], params: &ModelParams) -> Result<TrainedModel> {
    match *params {
        ModelParams::Knn { k } => train_knn(data, k),
        ModelParams::Svm { lambda, epochs, seed } => train_linear_svm(data, lambda, epochs, seed),
        ModelParams::Tree { max_depth, min_leaf } => train_decision_tree(data, max_depth, min_leaf),
    }
}
