//! Orthonormal DCT-II computed through one complex FFT of the same length
//! (even/odd reordering followed by a quarter-sample twiddle).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlannerScalar};

use super::matrix::{FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};

pub struct Dct2 {
    len: usize,
    fft: Arc<dyn Fft<f64>>,
    twiddles: Vec<Complex<f64>>,
}

impl std::fmt::Debug for Dct2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct2").field("len", &self.len).finish()
    }
}

impl Dct2 {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DCT length must be positive");
        let n = len as f64;
        let twiddles = (0..len)
            .map(|k| {
                let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                let angle = -std::f64::consts::PI * k as f64 / (2.0 * n);
                Complex::from_polar(scale, angle)
            })
            .collect();
        Self {
            len,
            fft: FftPlannerScalar::new().plan_fft_forward(len),
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `X[k] = s_k * sum_m x[m] cos(pi k (2m + 1) / 2M)` with `s_0 = sqrt(1/M)`
    /// and `s_k = sqrt(2/M)` otherwise.
    pub fn transform(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.len);
        let n = self.len;
        let mut v = vec![Complex::new(0.0, 0.0); n];
        for (i, &x) in input.iter().enumerate() {
            let slot = if i % 2 == 0 { i / 2 } else { n - 1 - i / 2 };
            v[slot].re = x;
        }
        self.fft.process(&mut v);
        v.iter().zip(&self.twiddles).map(|(c, t)| (c * t).re).collect()
    }
}

/// Inverse of the orthonormal DCT-II (an orthonormal DCT-III), evaluated
/// directly. Used to reconstruct log-mel frames from a full coefficient set.
pub fn inverse_dct2(coeffs: &[f64]) -> Vec<f64> {
    let m = coeffs.len() as f64;
    (0..coeffs.len())
        .map(|i| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let s = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                    s * c * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * m)).cos()
                })
                .sum()
        })
        .collect()
}

/// Keeps the first `n_mfcc` DCT-II coefficients of every log-mel frame.
pub fn mfcc(mel: &FeatureMatrix, n_mfcc: usize) -> Result<FeatureMatrix> {
    mfcc_with(mel, n_mfcc, &Dct2::new(mel.coeffs()))
}

pub(crate) fn mfcc_with(mel: &FeatureMatrix, n_mfcc: usize, dct: &Dct2) -> Result<FeatureMatrix> {
    if mel.kind() != FeatureKind::MelSpectrogram {
        return Err(Error::NotMelInput);
    }
    if n_mfcc == 0 || n_mfcc > mel.coeffs() {
        return Err(Error::InvalidParameter(format!(
            "n_mfcc must lie in 1..={}, got {n_mfcc}",
            mel.coeffs()
        )));
    }
    if dct.len() != mel.coeffs() {
        return Err(Error::ShapeMismatch(format!(
            "DCT length {} for {} mel bands",
            dct.len(),
            mel.coeffs()
        )));
    }
    let mut data = Vec::with_capacity(mel.frames() * n_mfcc);
    for f in 0..mel.frames() {
        data.extend_from_slice(&dct.transform(mel.row(f))[..n_mfcc]);
    }
    FeatureMatrix::new(FeatureKind::Mfcc, mel.frames(), n_mfcc, data)
}
