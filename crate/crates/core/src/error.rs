use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // audio-io
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported audio encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("audio contains no frames")]
    EmptyAudio,
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    // preprocess / features
    #[error("clip contains only silence")]
    SilenceOnly,
    #[error("clip too short: {samples} samples, need at least {needed}")]
    ClipTooShort { samples: usize, needed: usize },
    #[error("sample rate mismatch: clip is {actual} Hz, pipeline expects {expected} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("too many mel filters: adjacent band edges collapse to FFT bin {bin}")]
    TooManyFilters { bin: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("MFCC input must be a mel spectrogram")]
    NotMelInput,
    #[error("non-finite entry at frame {frame}, coefficient {coeff}")]
    NonFiniteEntry { frame: usize, coeff: usize },
    #[error("invalid feature file: {0}")]
    BadFeatureFile(String),

    // dataset
    #[error("manifest parse error: {0}")]
    ParseError(String),
    #[error("duplicate audio path in manifest: {0}")]
    DuplicatePath(String),
    #[error("missing audio file: {0}")]
    MissingAudio(PathBuf),
    #[error("pitch factor {0} outside [0.5, 2.0]")]
    FactorOutOfRange(f64),
    #[error("empty group: {0}")]
    EmptyGroup(String),
    #[error("bad recipe: {0}")]
    BadRecipe(String),
    #[error("stratum {stratum} has {size} samples, fewer than {k} folds")]
    StratumTooSmall { stratum: String, size: usize, k: usize },

    // classifiers
    #[error("k = {k} exceeds the {n} training samples")]
    KTooLarge { k: usize, n: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("feature vector has length {actual}, model expects {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("{path}: {source}")]
    Sample { path: PathBuf, source: Box<Error> },

    // evaluation
    #[error("no predictions to evaluate")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
