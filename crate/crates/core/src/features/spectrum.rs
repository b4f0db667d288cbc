//! Per-frame magnitude spectra via a zero-padded FFT.

use rustfft::num_complex::Complex;
use rustfft::FftPlannerScalar;

use super::window::WindowedFrames;

/// `|S(k)|` for `k = 0..=n_fft/2`, one row per frame. `n_fft` is the frame
/// length rounded up to a power of two; the filterbank is built against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub n_fft: usize,
    pub magnitudes: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

pub fn padded_len(frame_len: usize) -> usize {
    frame_len.max(1).next_power_of_two()
}

/// Forward DFT with kernel `exp(-j 2 pi k i / N)`. The scalar planner is used
/// so results do not depend on which SIMD path the host CPU offers.
pub fn magnitude_spectrum(frames: &WindowedFrames) -> Spectrum {
    let n_fft = padded_len(frames.frame_len());
    let fft = FftPlannerScalar::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let magnitudes = frames
        .frames
        .iter()
        .map(|frame| {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (c, &s) in buf.iter_mut().zip(frame) {
                c.re = s;
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            buf[..=n_fft / 2].iter().map(|c| c.norm()).collect()
        })
        .collect();
    Spectrum { n_fft, magnitudes }
}
