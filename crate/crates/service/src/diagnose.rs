//! The diagnosis path shared by the HTTP handler and the command line:
//! decode, resample, preprocess, extract, pool, predict.

use arpa_core::audio::{decode_wav_bytes, resample, AudioClip};
use arpa_core::classifiers::{pool, ModelKind, MODEL_FILE_VERSION};
use arpa_core::config::PipelineConfig;
use arpa_core::dataset::Label;
use arpa_core::features::FeatureExtractor;
use arpa_core::Error as CoreError;
use serde::{Deserialize, Serialize};

use crate::registry::ModelRegistry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub kind: ModelKind,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisResult {
    pub letter_id: String,
    pub label: Label,
    pub score: f64,
    pub model: ModelInfo,
}

#[derive(Debug, thiserror::Error)]
pub enum DiagnoseError {
    #[error("no model for letter {0:?}")]
    UnknownLetter(String),
    #[error("bad audio: {0}")]
    BadAudio(String),
    #[error("recording contains only silence")]
    Silence,
    #[error("recording is too short to analyse")]
    TooShort,
    #[error("recording lasts {secs:.1} s, limit is {max:.1} s")]
    TooLong { secs: f64, max: f64 },
    #[error("{0}")]
    Internal(String),
}

impl DiagnoseError {
    /// Short machine-readable reason for clients.
    pub fn reason(&self) -> &'static str {
        match self {
            DiagnoseError::UnknownLetter(_) => "unknown_letter",
            DiagnoseError::BadAudio(_) => "bad_audio",
            DiagnoseError::Silence => "silence",
            DiagnoseError::TooShort => "too_short",
            DiagnoseError::TooLong { .. } => "too_long",
            DiagnoseError::Internal(_) => "internal",
        }
    }
}

impl From<CoreError> for DiagnoseError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::SilenceOnly => DiagnoseError::Silence,
            CoreError::ClipTooShort { .. } => DiagnoseError::TooShort,
            CoreError::NotWav(_)
            | CoreError::UnsupportedEncoding(_)
            | CoreError::EmptyAudio
            | CoreError::InvalidClip(_)
            | CoreError::Io { .. } => DiagnoseError::BadAudio(e.to_string()),
            other => DiagnoseError::Internal(other.to_string()),
        }
    }
}

pub struct Diagnoser {
    extractor: FeatureExtractor,
    registry: ModelRegistry,
    max_audio_secs: f64,
}

impl Diagnoser {
    pub fn new(pipeline: &PipelineConfig, registry: ModelRegistry, max_audio_secs: f64) -> arpa_core::Result<Self> {
        Ok(Self {
            extractor: FeatureExtractor::new(pipeline)?,
            registry,
            max_audio_secs,
        })
    }

    pub fn registry(&self) -> &ModelRegistry {
        &self.registry
    }

    pub fn diagnose_bytes(&self, wav: &[u8], letter: &str) -> Result<DiagnosisResult, DiagnoseError> {
        if self.registry.get(letter).is_none() {
            return Err(DiagnoseError::UnknownLetter(letter.to_string()));
        }
        let clip = decode_wav_bytes(wav)?;
        self.diagnose_clip(&clip, letter)
    }

    pub fn diagnose_clip(&self, clip: &AudioClip, letter: &str) -> Result<DiagnosisResult, DiagnoseError> {
        let model = self
            .registry
            .get(letter)
            .ok_or_else(|| DiagnoseError::UnknownLetter(letter.to_string()))?;
        let secs = clip.duration_secs();
        if secs > self.max_audio_secs {
            return Err(DiagnoseError::TooLong {
                secs,
                max: self.max_audio_secs,
            });
        }
        let clip = resample(clip, self.extractor.config().sample_rate_hz)?;
        let features = self.extractor.extract(&clip)?;
        let prediction = model.predict(&pool(&features.mfcc))?;
        Ok(DiagnosisResult {
            letter_id: letter.to_string(),
            label: prediction.label,
            score: prediction.score,
            model: ModelInfo {
                kind: model.kind(),
                version: MODEL_FILE_VERSION,
            },
        })
    }
}
