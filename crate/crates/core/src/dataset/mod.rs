//! Labeled clip collections: manifest files, augmentation, synthetic corpora
//! and stratified splits.

mod augment;
mod split;
mod synth;

pub use augment::{augment_to_count, pitch_shift, AugmentOptions, AugmentOutcome, AugmentedClip};
pub use split::{split, stratified_folds, stratified_holdout, SplitAssignment, SplitMode};
pub use synth::{
    generate_synthetic_corpus, synth_clip, LetterRecipe, SynthRecipe, ToneTemplate,
};

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

pub const MANIFEST_VERSION: u32 = 1;

/// Pronunciation label. `Correct` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Correct,
    Incorrect,
}

impl Label {
    pub fn other(self) -> Self {
        match self {
            Label::Correct => Label::Incorrect,
            Label::Incorrect => Label::Correct,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Correct => "correct",
            Label::Incorrect => "incorrect",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "correct" => Ok(Label::Correct),
            "incorrect" => Ok(Label::Incorrect),
            other => Err(Error::InvalidParameter(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Recorded,
    Augmented,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    /// Relative to the manifest's directory (absolute paths are kept as-is).
    pub path: PathBuf,
    pub letter: String,
    pub label: Label,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub samples: Vec<LabeledSample>,
    /// Directory the sample paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>, samples: Vec<LabeledSample>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            samples,
            root: root.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resolve(&self, sample: &LabeledSample) -> PathBuf {
        self.root.join(&sample.path)
    }

    /// Sample counts per `(letter, label)` cell.
    pub fn counts(&self) -> BTreeMap<(String, Label), usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            *counts.entry((s.letter.clone(), s.label)).or_insert(0) += 1;
        }
        counts
    }

    pub fn letter_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            *counts.entry(s.letter.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn letters(&self) -> Vec<String> {
        self.letter_counts().into_keys().collect()
    }

    /// Samples of one letter, in manifest order.
    pub fn for_letter(&self, letter: &str) -> DatasetManifest {
        DatasetManifest {
            version: self.version,
            samples: self
                .samples
                .iter()
                .filter(|s| s.letter == letter)
                .cloned()
                .collect(),
            root: self.root.clone(),
        }
    }

    /// Structural checks that do not touch the filesystem.
    pub fn validate_structure(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::ParseError(format!(
                "unsupported manifest version {}",
                self.version
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.samples {
            if s.letter.trim().is_empty() {
                return Err(Error::ParseError(format!(
                    "sample {} has an empty letter id",
                    s.path.display()
                )));
            }
            if !seen.insert(&s.path) {
                return Err(Error::DuplicatePath(s.path.display().to_string()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json().as_bytes())
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::ParseError(e.to_string()))?;
    manifest.root = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    manifest.validate_structure()?;
    if let Some(missing) = manifest.samples.iter().find(|s| !manifest.resolve(s).is_file()) {
        return Err(Error::MissingAudio(missing.path.clone()));
    }
    Ok(manifest)
}
