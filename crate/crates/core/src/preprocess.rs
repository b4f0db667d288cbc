//! Gaussian denoising and leading/trailing silence removal.

use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub gaussian_sigma_samples: f64,
    /// Defaults to `ceil(3 * sigma)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_radius: Option<usize>,
    /// Frames quieter than this (dB relative to the loudest frame) are silence.
    pub silence_threshold_db: f64,
    pub silence_frame_ms: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            gaussian_sigma_samples: 2.0,
            kernel_radius: None,
            silence_threshold_db: -40.0,
            silence_frame_ms: 10.0,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if !(self.gaussian_sigma_samples.is_finite() && self.gaussian_sigma_samples > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian_sigma_samples must be positive, got {}",
                self.gaussian_sigma_samples
            )));
        }
        if self.kernel_radius == Some(0) {
            return Err(Error::InvalidParameter("kernel_radius must be positive".into()));
        }
        if !self.silence_threshold_db.is_finite() {
            return Err(Error::InvalidParameter("silence_threshold_db must be finite".into()));
        }
        if !(self.silence_frame_ms.is_finite() && self.silence_frame_ms > 0.0) {
            return Err(Error::InvalidParameter("silence_frame_ms must be positive".into()));
        }
        if self.silence_frame_samples(sample_rate_hz) < 1 {
            return Err(Error::InvalidParameter(format!(
                "silence_frame_ms {} is shorter than one sample at {sample_rate_hz} Hz",
                self.silence_frame_ms
            )));
        }
        Ok(())
    }

    pub fn radius(&self) -> usize {
        self.kernel_radius
            .unwrap_or_else(|| (3.0 * self.gaussian_sigma_samples).ceil() as usize)
            .max(1)
    }

    pub fn silence_frame_samples(&self, sample_rate_hz: u32) -> usize {
        (self.silence_frame_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    /// Unit-sum kernel `exp(-n^2 / (2 sigma^2))` for `n` in `[-radius, radius]`.
    pub fn kernel(&self) -> Vec<f64> {
        let r = self.radius() as i64;
        let two_var = 2.0 * self.gaussian_sigma_samples * self.gaussian_sigma_samples;
        let raw: Vec<f64> = (-r..=r).map(|n| (-((n * n) as f64) / two_var).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

/// Mirrors an out-of-range index back into `0..len` without repeating the
/// edge sample (`x[-1] = x[1]`).
fn reflect(index: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let m = index.rem_euclid(period);
    if m < len as i64 {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub fn gaussian_denoise(clip: &AudioClip, cfg: &PreprocessConfig) -> Result<AudioClip> {
    cfg.validate(clip.sample_rate_hz())?;
    let kernel = cfg.kernel();
    let r = cfg.radius() as i64;
    let x = clip.samples();
    let out = (0..x.len() as i64)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * x[reflect(i + j as i64 - r, x.len())])
                .sum::<f64>()
        })
        // A convex combination of [-1, 1] values; clamp only absorbs rounding.
        .map(|v: f64| v.clamp(-1.0, 1.0))
        .collect();
    Ok(AudioClip::from_parts_unchecked(out, clip.sample_rate_hz()))
}

/// Removes leading and trailing frames whose RMS falls below the relative
/// threshold. Interior frames are never touched.
pub fn trim_silence(clip: &AudioClip, cfg: &PreprocessConfig) -> Result<AudioClip> {
    cfg.validate(clip.sample_rate_hz())?;
    let frame = cfg.silence_frame_samples(clip.sample_rate_hz());
    let x = clip.samples();
    let rms: Vec<f64> = x
        .chunks(frame)
        .map(|c| (c.iter().map(|s| s * s).sum::<f64>() / c.len() as f64).sqrt())
        .collect();
    let peak = rms.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::SilenceOnly);
    }
    let voiced = |r: &f64| *r > 0.0 && 20.0 * (r / peak).log10() >= cfg.silence_threshold_db;
    let first = rms.iter().position(voiced).ok_or(Error::SilenceOnly)?;
    let last = rms.iter().rposition(voiced).ok_or(Error::SilenceOnly)?;
    let start = first * frame;
    let end = ((last + 1) * frame).min(x.len());
    Ok(AudioClip::from_parts_unchecked(
        x[start..end].to_vec(),
        clip.sample_rate_hz(),
    ))
}

/// Denoise, then trim.
pub fn preprocess(clip: &AudioClip, cfg: &PreprocessConfig) -> Result<AudioClip> {
    trim_silence(&gaussian_denoise(clip, cfg)?, cfg)
}
