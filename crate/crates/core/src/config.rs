//! One configuration document shared by the CLI and the HTTP service.
//!
//! ```toml
//! [pipeline]
//! n_mels = 40
//! [pipeline.frame]
//! frame_ms = 25.0
//! [service]
//! listen = "127.0.0.1:8080"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::CANONICAL_RATE_HZ;
use crate::classifiers::ClassifierDefaults;
use crate::error::{Error, Result};
use crate::features::FrameSpec;
use crate::preprocess::PreprocessConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sample_rate_hz: u32,
    pub preprocess: PreprocessConfig,
    pub frame: FrameSpec,
    pub pre_emphasis: f64,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub mel_low_hz: f64,
    /// Upper filterbank edge; Nyquist when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mel_high_hz: Option<f64>,
    pub classifier: ClassifierDefaults,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: CANONICAL_RATE_HZ,
            preprocess: PreprocessConfig::default(),
            frame: FrameSpec::default(),
            pre_emphasis: 0.97,
            n_mels: 40,
            n_mfcc: 13,
            mel_low_hz: 0.0,
            mel_high_hz: None,
            classifier: ClassifierDefaults::default(),
            seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn mel_high_hz(&self) -> f64 {
        self.mel_high_hz
            .unwrap_or(f64::from(self.sample_rate_hz) / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::InvalidParameter("sample_rate_hz must be positive".into()));
        }
        self.preprocess.validate(self.sample_rate_hz)?;
        self.frame.validate()?;
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::InvalidParameter(format!(
                "pre_emphasis must lie in [0, 1), got {}",
                self.pre_emphasis
            )));
        }
        if self.n_mels == 0 || self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= n_mfcc <= n_mels, got n_mfcc={} n_mels={}",
                self.n_mfcc, self.n_mels
            )));
        }
        self.classifier.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceSettings {
    pub listen: String,
    pub model_dir: PathBuf,
    pub data_dir: PathBuf,
    /// Bearer token accepted for parent accounts. No tokens configured means
    /// the API is open.
    pub parent_token: Option<String>,
    pub therapist_token: Option<String>,
    pub max_upload_bytes: usize,
    pub max_audio_secs: f64,
    /// Model kind used when a letter has several model files (`knn`, `svm`, `tree`).
    pub preferred_model: Option<String>,
}

impl Default for ServiceSettings {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            model_dir: PathBuf::from("models"),
            data_dir: PathBuf::from("data"),
            parent_token: None,
            therapist_token: None,
            max_upload_bytes: 10 * 1024 * 1024,
            max_audio_secs: 30.0,
            preferred_model: None,
        }
    }
}

impl ServiceSettings {
    /// Applies `ARPA_LISTEN`, `ARPA_MODEL_DIR`, `ARPA_DATA_DIR`,
    /// `ARPA_PARENT_TOKEN` and `ARPA_THERAPIST_TOKEN` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(v) = lookup("ARPA_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = lookup("ARPA_MODEL_DIR") {
            self.model_dir = v.into();
        }
        if let Some(v) = lookup("ARPA_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = lookup("ARPA_PARENT_TOKEN") {
            self.parent_token = Some(v);
        }
        if let Some(v) = lookup("ARPA_THERAPIST_TOKEN") {
            self.therapist_token = Some(v);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArpaConfig {
    pub pipeline: PipelineConfig,
    pub service: ServiceSettings,
}

impl ArpaConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
        cfg.pipeline.validate()?;
        Ok(cfg)
    }

    /// Loads a TOML file. Relative service directories resolve against the
    /// file's own directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for dir in [&mut cfg.service.model_dir, &mut cfg.service.data_dir] {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}
