//! Versioned JSON model files. Numeric arrays are stored as base64 of
//! little-endian `f64` or `i64` values so reloading is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Map, Value};

use super::{KnnModel, ModelBody, ModelKind, ModelParams, Node, Standardizer, SvmModel, TrainedModel, TreeModel};
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

pub const MODEL_FILE_VERSION: u32 = 1;

fn encode_f64(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn encode_i64(values: &[i64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_words(s: &str) -> Result<Vec<[u8; 8]>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::ParseError(format!("bad base64 array: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::ParseError("array length is not a multiple of 8 bytes".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| c.try_into().expect("chunk of 8"))
        .collect())
}

fn decode_f64(s: &str) -> Result<Vec<f64>> {
    Ok(decode_words(s)?.into_iter().map(f64::from_le_bytes).collect())
}

fn decode_i64(s: &str) -> Result<Vec<i64>> {
    Ok(decode_words(s)?.into_iter().map(i64::from_le_bytes).collect())
}

fn label_code(label: Label) -> i64 {
    match label {
        Label::Correct => 1,
        Label::Incorrect => 0,
    }
}

fn label_from_code(code: i64) -> Result<Label> {
    match code {
        1 => Ok(Label::Correct),
        0 => Ok(Label::Incorrect),
        other => Err(Error::ParseError(format!("bad label code {other}"))),
    }
}

fn body_arrays(body: &ModelBody) -> BTreeMap<&'static str, String> {
    let mut arrays = BTreeMap::new();
    match body {
        ModelBody::Knn(m) => {
            let flat: Vec<f64> = m.vectors.iter().flatten().copied().collect();
            let labels: Vec<i64> = m.labels.iter().map(|&l| label_code(l)).collect();
            arrays.insert("vectors", encode_f64(&flat));
            arrays.insert("labels", encode_i64(&labels));
        }
        ModelBody::Svm(m) => {
            arrays.insert("weights", encode_f64(&m.weights));
            arrays.insert("bias", encode_f64(&[m.bias]));
        }
        ModelBody::Tree(m) => {
            let n = m.nodes.len();
            let (mut feature, mut threshold, mut left, mut right) =
                (vec![-1i64; n], vec![0.0; n], vec![-1i64; n], vec![-1i64; n]);
            let (mut label, mut score, mut count) = (vec![0i64; n], vec![0.0; n], vec![0i64; n]);
            for (i, node) in m.nodes.iter().enumerate() {
                match node {
                    Node::Split {
                        feature: f,
                        threshold: t,
                        left: l,
                        right: r,
                    } => {
                        feature[i] = *f as i64;
                        threshold[i] = *t;
                        left[i] = *l as i64;
                        right[i] = *r as i64;
                    }
                    Node::Leaf {
                        label: lb,
                        score: s,
                        count: c,
                    } => {
                        label[i] = label_code(*lb);
                        score[i] = *s;
                        count[i] = *c as i64;
                    }
                }
            }
            arrays.insert("feature", encode_i64(&feature));
            arrays.insert("threshold", encode_f64(&threshold));
            arrays.insert("left", encode_i64(&left));
            arrays.insert("right", encode_i64(&right));
            arrays.insert("label", encode_i64(&label));
            arrays.insert("score", encode_f64(&score));
            arrays.insert("count", encode_i64(&count));
        }
    }
    arrays
}

pub fn model_to_json(model: &TrainedModel) -> String {
    let mut params = serde_json::to_value(model.params).expect("params serialize");
    if let Value::Object(map) = &mut params {
        map.remove("kind");
    }
    let doc = json!({
        "version": MODEL_FILE_VERSION,
        "kind": model.kind(),
        "letter": model.letter,
        "params": params,
        "arrays": body_arrays(&model.body),
        "scaler": {
            "mean": encode_f64(&model.scaler.mean),
            "std": encode_f64(&model.scaler.std),
        },
    });
    serde_json::to_string_pretty(&doc).expect("model serializes")
}

struct Fields<'a>(&'a Map<String, Value>);

impl<'a> Fields<'a> {
    fn get(&self, key: &str) -> Result<&'a Value> {
        self.0
            .get(key)
            .ok_or_else(|| Error::ParseError(format!("missing field {key:?}")))
    }

    fn str(&self, key: &str) -> Result<&'a str> {
        self.get(key)?
            .as_str()
            .ok_or_else(|| Error::ParseError(format!("field {key:?} is not a string")))
    }

    fn object(&self, key: &str) -> Result<Fields<'a>> {
        self.get(key)?
            .as_object()
            .map(Fields)
            .ok_or_else(|| Error::ParseError(format!("field {key:?} is not an object")))
    }

    fn f64s(&self, key: &str) -> Result<Vec<f64>> {
        decode_f64(self.str(key)?)
    }

    fn i64s(&self, key: &str) -> Result<Vec<i64>> {
        decode_i64(self.str(key)?)
    }
}

fn index(v: i64, n: usize) -> Result<usize> {
    usize::try_from(v)
        .ok()
        .filter(|&i| i < n)
        .ok_or_else(|| Error::ParseError(format!("index {v} out of range")))
}

fn tree_from_arrays(arrays: &Fields<'_>, dim: usize) -> Result<TreeModel> {
    let feature = arrays.i64s("feature")?;
    let n = feature.len();
    let threshold = arrays.f64s("threshold")?;
    let left = arrays.i64s("left")?;
    let right = arrays.i64s("right")?;
    let label = arrays.i64s("label")?;
    let score = arrays.f64s("score")?;
    let count = arrays.i64s("count")?;
    if n == 0 || [threshold.len(), left.len(), right.len(), label.len(), score.len(), count.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(Error::ParseError("tree arrays have inconsistent lengths".into()));
    }
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        if feature[i] < 0 {
            nodes.push(Node::Leaf {
                label: label_from_code(label[i])?,
                score: score[i],
                count: usize::try_from(count[i]).map_err(|_| Error::ParseError("negative leaf count".into()))?,
            });
        } else {
            let (l, r) = (index(left[i], n)?, index(right[i], n)?);
            if l <= i || r <= i {
                return Err(Error::ParseError("tree children must follow their parent".into()));
            }
            nodes.push(Node::Split {
                feature: index(feature[i], dim)?,
                threshold: threshold[i],
                left: l,
                right: r,
            });
        }
    }
    Ok(TreeModel { nodes })
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
    let root = doc
        .as_object()
        .map(Fields)
        .ok_or_else(|| Error::ParseError("model file is not a JSON object".into()))?;
    let version = root
        .get("version")?
        .as_u64()
        .ok_or_else(|| Error::ParseError("version is not an integer".into()))?;
    if version != u64::from(MODEL_FILE_VERSION) {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: MODEL_FILE_VERSION,
        });
    }
    let kind: ModelKind = root.str("kind")?.parse().map_err(|_| Error::ParseError("unknown model kind".into()))?;
    let letter = root.str("letter")?.to_string();
    let mut params = root.get("params")?.clone();
    match &mut params {
        Value::Object(map) => {
            map.insert("kind".into(), Value::String(kind.as_str().into()));
        }
        _ => return Err(Error::ParseError("params is not an object".into())),
    }
    let params: ModelParams = serde_json::from_value(params).map_err(|e| Error::ParseError(e.to_string()))?;
    params.validate().map_err(|e| Error::ParseError(e.to_string()))?;

    let scaler_fields = root.object("scaler")?;
    let scaler = Standardizer {
        mean: scaler_fields.f64s("mean")?,
        std: scaler_fields.f64s("std")?,
    };
    let dim = scaler.dim();
    if dim == 0 || scaler.std.len() != dim {
        return Err(Error::ParseError("scaler arrays are inconsistent".into()));
    }

    let arrays = root.object("arrays")?;
    let body = match params {
        ModelParams::Knn { k } => {
            let flat = arrays.f64s("vectors")?;
            let labels = arrays
                .i64s("labels")?
                .into_iter()
                .map(label_from_code)
                .collect::<Result<Vec<_>>>()?;
            if flat.len() != labels.len() * dim || labels.len() < k {
                return Err(Error::ParseError("knn arrays are inconsistent".into()));
            }
            let vectors = flat.chunks_exact(dim).map(<[f64]>::to_vec).collect();
            ModelBody::Knn(KnnModel { k, vectors, labels })
        }
        ModelParams::Svm { .. } => {
            let weights = arrays.f64s("weights")?;
            let bias = arrays.f64s("bias")?;
            if weights.len() != dim || bias.len() != 1 {
                return Err(Error::ParseError("svm arrays are inconsistent".into()));
            }
            ModelBody::Svm(SvmModel { weights, bias: bias[0] })
        }
        ModelParams::Tree { .. } => ModelBody::Tree(tree_from_arrays(&arrays, dim)?),
    };
    Ok(TrainedModel {
        letter,
        params,
        scaler,
        body,
    })
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), model_to_json(model).as_bytes())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}
