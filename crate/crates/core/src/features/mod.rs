//! Mel-spectrogram and MFCC extraction.
//!
//! The chain is: preprocess (denoise, trim) -> pre-emphasis -> framing with a
//! periodic Hamming window -> zero-padded FFT magnitudes -> mel filterbank on
//! the power spectrum -> natural log -> orthonormal DCT-II.

mod dct;
mod matrix;
mod mel;
mod spectrum;
mod window;

pub use dct::{inverse_dct2, mfcc, Dct2};
pub use matrix::{FeatureKind, FeatureMatrix, ARPF_MAGIC, ARPF_VERSION};
pub use mel::{build_mel_filterbank, hz_to_mel, mel_spectrogram, mel_to_hz, MelFilterbank, LOG_FLOOR};
pub use spectrum::{magnitude_spectrum, padded_len, Spectrum};
pub use window::{frame_and_window, hamming, pre_emphasize, FrameSpec, WindowedFrames};

use crate::audio::{resample, AudioClip};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::preprocess::preprocess;

/// Both feature views of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub mel: FeatureMatrix,
    pub mfcc: FeatureMatrix,
}

/// Holds the filterbank and DCT plan for one configuration so they are built
/// once and shared across clips (and threads).
#[derive(Debug)]
pub struct FeatureExtractor {
    cfg: PipelineConfig,
    filterbank: MelFilterbank,
    dct: Dct2,
}

impl FeatureExtractor {
    pub fn new(cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let rate = cfg.sample_rate_hz;
        let n_fft = padded_len(cfg.frame.frame_len(rate));
        let filterbank =
            build_mel_filterbank(cfg.n_mels, n_fft, rate, cfg.mel_low_hz, cfg.mel_high_hz())?;
        Ok(Self {
            cfg: cfg.clone(),
            filterbank,
            dct: Dct2::new(cfg.n_mels),
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Runs the full chain on a clip already at the pipeline rate.
    pub fn extract(&self, clip: &AudioClip) -> Result<Features> {
        if clip.sample_rate_hz() != self.cfg.sample_rate_hz {
            return Err(Error::SampleRateMismatch {
                expected: self.cfg.sample_rate_hz,
                actual: clip.sample_rate_hz(),
            });
        }
        let clean = preprocess(clip, &self.cfg.preprocess)?;
        let emphasized = pre_emphasize(clean.samples(), self.cfg.pre_emphasis)?;
        let frames = frame_and_window(&emphasized, self.cfg.sample_rate_hz, &self.cfg.frame)?;
        let spectrum = magnitude_spectrum(&frames);
        let mel = mel_spectrogram(&spectrum, &self.filterbank)?;
        let mfcc = dct::mfcc_with(&mel, self.cfg.n_mfcc, &self.dct)?;
        Ok(Features { mel, mfcc })
    }

    /// Resamples to the pipeline rate first when needed.
    pub fn extract_any_rate(&self, clip: &AudioClip) -> Result<Features> {
        if clip.sample_rate_hz() == self.cfg.sample_rate_hz {
            self.extract(clip)
        } else {
            self.extract(&resample(clip, self.cfg.sample_rate_hz)?)
        }
    }
}

/// One-shot convenience over [`FeatureExtractor`]; returns `(mel, mfcc)`.
pub fn extract_features(clip: &AudioClip, cfg: &PipelineConfig) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let f = FeatureExtractor::new(cfg)?.extract(clip)?;
    Ok((f.mel, f.mfcc))
}
