//! Mel-scale triangular filterbank and log-mel energies.

use super::matrix::{FeatureKind, FeatureMatrix};
use super::spectrum::Spectrum;
use crate::error::{Error, Result};

/// Floor added to mel energies before the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `n_filters` rows of `n_fft/2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    pub low_hz: f64,
    pub high_hz: f64,
    pub n_fft: usize,
    /// Center frequency of each band (exact mel-grid point).
    pub center_hz: Vec<f64>,
    /// FFT bin carrying each band's unit peak.
    pub center_bin: Vec<usize>,
}

impl MelFilterbank {
    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

pub fn build_mel_filterbank(
    n_filters: usize,
    n_fft: usize,
    rate_hz: u32,
    low_hz: f64,
    high_hz: f64,
) -> Result<MelFilterbank> {
    let nyquist = f64::from(rate_hz) / 2.0;
    if n_filters == 0 || n_fft < 2 {
        return Err(Error::InvalidParameter(
            "filterbank needs at least one filter and n_fft >= 2".into(),
        ));
    }
    if !(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist) {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= low_hz < high_hz <= {nyquist}, got [{low_hz}, {high_hz}]"
        )));
    }
    let (lo, hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
    let step = (hi - lo) / (n_filters + 1) as f64;
    let edges_hz: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(lo + step * i as f64))
        .collect();
    let edges_bin: Vec<usize> = edges_hz
        .iter()
        .map(|hz| ((hz * n_fft as f64 / f64::from(rate_hz)).round() as usize).min(n_fft / 2))
        .collect();
    if let Some(w) = edges_bin.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::TooManyFilters { bin: w[1] });
    }

    let bins = n_fft / 2 + 1;
    let weights = edges_bin
        .windows(3)
        .map(|e| {
            let (left, center, right) = (e[0], e[1], e[2]);
            let mut row = vec![0.0; bins];
            for (k, w) in row.iter_mut().enumerate().take(right + 1).skip(left) {
                *w = if k <= center {
                    (k - left) as f64 / (center - left) as f64
                } else {
                    (right - k) as f64 / (right - center) as f64
                };
            }
            row
        })
        .collect();

    Ok(MelFilterbank {
        weights,
        low_hz,
        high_hz,
        n_fft,
        center_hz: edges_hz[1..=n_filters].to_vec(),
        center_bin: edges_bin[1..=n_filters].to_vec(),
    })
}

/// `log(fb . |S|^2 + 1e-10)` per frame.
pub fn mel_spectrogram(spectrum: &Spectrum, fb: &MelFilterbank) -> Result<FeatureMatrix> {
    if spectrum.n_fft != fb.n_fft || spectrum.bins() != fb.bins() {
        return Err(Error::ShapeMismatch(format!(
            "spectrum has {} bins (n_fft {}), filterbank expects {} (n_fft {})",
            spectrum.bins(),
            spectrum.n_fft,
            fb.bins(),
            fb.n_fft
        )));
    }
    if spectrum.magnitudes.is_empty() {
        return Err(Error::ShapeMismatch("spectrum has no frames".into()));
    }
    let mut data = Vec::with_capacity(spectrum.magnitudes.len() * fb.n_filters());
    for frame in &spectrum.magnitudes {
        let power: Vec<f64> = frame.iter().map(|m| m * m).collect();
        for row in &fb.weights {
            let energy: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            data.push((energy + LOG_FLOOR).ln());
        }
    }
    FeatureMatrix::new(
        FeatureKind::MelSpectrogram,
        spectrum.magnitudes.len(),
        fb.n_filters(),
        data,
    )
}
