//! Pre-emphasis, framing and Hamming windowing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis frame length and hop, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSpec {
    pub frame_ms: f64,
    pub hop_ms: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            frame_ms: 25.0,
            hop_ms: 10.0,
        }
    }
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_ms > 20.0 && self.frame_ms < 40.0) {
            return Err(Error::InvalidParameter(format!(
                "frame_ms must lie in (20, 40), got {}",
                self.frame_ms
            )));
        }
        if !(self.hop_ms > 0.0 && self.hop_ms <= self.frame_ms) {
            return Err(Error::InvalidParameter(format!(
                "hop_ms must lie in (0, frame_ms], got {}",
                self.hop_ms
            )));
        }
        Ok(())
    }

    pub fn frame_len(&self, rate_hz: u32) -> usize {
        (self.frame_ms * f64::from(rate_hz) / 1000.0).round() as usize
    }

    pub fn hop_len(&self, rate_hz: u32) -> usize {
        ((self.hop_ms * f64::from(rate_hz) / 1000.0).round() as usize).max(1)
    }

    /// `floor((T - N) / hop) + 1`, or `None` when the signal is shorter than a frame.
    pub fn frame_count(&self, total: usize, rate_hz: u32) -> Option<usize> {
        let n = self.frame_len(rate_hz);
        (total >= n).then(|| (total - n) / self.hop_len(rate_hz) + 1)
    }
}

/// `y[0] = x[0]`, `y[n] = x[n] - alpha * x[n-1]`.
///
/// The output can leave `[-1, 1]`, so it is a plain buffer rather than an
/// [`AudioClip`](crate::audio::AudioClip).
pub fn pre_emphasize(samples: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "pre-emphasis alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let mut out = Vec::with_capacity(samples.len());
    if let Some(&first) = samples.first() {
        out.push(first);
    }
    out.extend(samples.windows(2).map(|w| w[1] - alpha * w[0]));
    Ok(out)
}

/// Periodic Hamming window: `0.54 - 0.46 cos(2 pi n / N)` for `n = 0..N-1`.
pub fn hamming(n: usize) -> Vec<f64> {
    let len = n as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / len).cos())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedFrames {
    pub frames: Vec<Vec<f64>>,
    pub window: Vec<f64>,
}

impl WindowedFrames {
    pub fn frame_len(&self) -> usize {
        self.window.len()
    }
}

pub fn frame_and_window(samples: &[f64], rate_hz: u32, spec: &FrameSpec) -> Result<WindowedFrames> {
    spec.validate()?;
    let n = spec.frame_len(rate_hz);
    let hop = spec.hop_len(rate_hz);
    let count = spec
        .frame_count(samples.len(), rate_hz)
        .ok_or(Error::ClipTooShort {
            samples: samples.len(),
            needed: n,
        })?;
    let window = hamming(n);
    let frames = (0..count)
        .map(|f| {
            samples[f * hop..f * hop + n]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect();
    Ok(WindowedFrames { frames, window })
}
