//! Per-letter model set loaded once at startup.

use std::collections::BTreeMap;
use std::path::Path;

use arpa_core::classifiers::{load_model, ModelKind, TrainedModel, MODEL_FILE_VERSION};
use serde::Serialize;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LetterInfo {
    pub letter_id: String,
    pub model_kind: ModelKind,
    pub model_version: u32,
}

#[derive(Debug, Default)]
pub struct ModelRegistry {
    models: BTreeMap<String, TrainedModel>,
}

fn rank(kind: ModelKind, preferred: Option<ModelKind>) -> usize {
    if Some(kind) == preferred {
        return 0;
    }
    1 + ModelKind::ALL.iter().position(|k| *k == kind).unwrap_or(0)
}

impl ModelRegistry {
    /// Loads every `*.json` model in `dir`. Unreadable or corrupt files are
    /// logged and skipped. When a letter has several models the preferred
    /// kind wins, then knn, svm, tree.
    pub fn load_dir(dir: &Path, preferred: Option<ModelKind>) -> std::io::Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut models: BTreeMap<String, TrainedModel> = BTreeMap::new();
        for path in paths {
            match load_model(&path) {
                Ok(model) => {
                    let keep = models
                        .get(&model.letter)
                        .is_none_or(|old| rank(model.kind(), preferred) < rank(old.kind(), preferred));
                    if keep {
                        models.insert(model.letter.clone(), model);
                    }
                }
                Err(e) => tracing::warn!(path = %path.display(), error = %e, "skipping model file"),
            }
        }
        Ok(Self { models })
    }

    pub fn from_models(models: impl IntoIterator<Item = TrainedModel>) -> Self {
        Self {
            models: models.into_iter().map(|m| (m.letter.clone(), m)).collect(),
        }
    }

    pub fn get(&self, letter: &str) -> Option<&TrainedModel> {
        self.models.get(letter)
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn letters(&self) -> Vec<LetterInfo> {
        self.models
            .values()
            .map(|m| LetterInfo {
                letter_id: m.letter.clone(),
                model_kind: m.kind(),
                model_version: MODEL_FILE_VERSION,
            })
            .collect()
    }
}
