//! Audio clip type and RIFF/WAVE input/output.
//!
//! Every clip inside the pipeline is mono with amplitudes in `[-1, 1]`. Files
//! are read as 8/16/24/32-bit integer PCM or 32-bit float, one or two
//! channels; they are always written back as 16-bit mono PCM.

use std::io::{Cursor, Read, Seek};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

/// Rate every downstream stage assumes. Callers resample before extraction.
pub const CANONICAL_RATE_HZ: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    /// Builds a clip, rejecting empty buffers, a zero rate, or amplitudes
    /// outside `[-1, 1]` (NaN included).
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidClip("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if let Some(i) = samples.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(Error::InvalidClip(format!(
                "sample {i} = {} outside [-1, 1]",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Like [`AudioClip::new`] but saturates out-of-range amplitudes instead of
    /// failing. NaN becomes 0.
    pub fn from_clamped(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        let samples = samples
            .into_iter()
            .map(|s| if s.is_nan() { 0.0 } else { s.clamp(-1.0, 1.0) })
            .collect();
        Self::new(samples, sample_rate_hz)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Crate-internal constructor for transforms that preserve the invariants
    /// by construction (sub-spans, convex combinations of valid samples).
    pub(crate) fn from_parts_unchecked(samples: Vec<f64>, sample_rate_hz: u32) -> Self {
        debug_assert!(!samples.is_empty() && sample_rate_hz > 0);
        Self {
            samples,
            sample_rate_hz,
        }
    }
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_wav(std::io::BufReader::new(file))
}

/// Decodes a WAV stream held in memory (uploads, tests).
pub fn decode_wav_bytes(bytes: &[u8]) -> Result<AudioClip> {
    read_wav(Cursor::new(bytes))
}

pub fn read_wav<R: Read + Seek>(reader: R) -> Result<AudioClip> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound_error)?;
    let spec = wav.spec();
    let channels = usize::from(spec.channels);
    if channels == 0 || channels > 2 {
        return Err(Error::UnsupportedEncoding(format!(
            "{} channels (only mono or stereo)",
            spec.channels
        )));
    }
    if spec.sample_rate == 0 {
        return Err(Error::NotWav("sample rate 0 in fmt chunk".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = f64::from(1u32 << (bits - 1));
            wav.samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<_, _>>()
                .map_err(map_hound_error)?
        }
        (hound::SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(map_hound_error)?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{format:?} with {bits} bits per sample"
            )))
        }
    };

    if interleaved.len() < channels {
        return Err(Error::EmptyAudio);
    }
    let mono: Vec<f64> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioClip::from_clamped(mono, spec.sample_rate)
}

fn map_hound_error(err: hound::Error) -> Error {
    match err {
        hound::Error::FormatError(msg) => Error::NotWav(msg.to_string()),
        hound::Error::Unsupported => {
            Error::UnsupportedEncoding("compressed or unknown WAVE format".into())
        }
        hound::Error::TooWide | hound::Error::InvalidSampleFormat => {
            Error::UnsupportedEncoding(err.to_string())
        }
        hound::Error::UnfinishedSample => Error::NotWav("truncated sample data".into()),
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::NotWav("unexpected end of file".into())
        }
        hound::Error::IoError(e) => Error::NotWav(e.to_string()),
    }
}

/// Maps one amplitude to 16-bit PCM: scale by 32768, round, saturate.
pub fn quantize_i16(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes the clip as a 16-bit mono PCM WAV file image.
pub fn encode_wav_bytes(clip: &AudioClip) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + clip.len() * 2));
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec)
            .map_err(|e| Error::io("<memory>", std::io::Error::other(e.to_string())))?;
        let mut i16_writer = writer.get_i16_writer(clip.len() as u32);
        for &s in &clip.samples {
            i16_writer.write_sample(quantize_i16(s));
        }
        i16_writer
            .flush()
            .map_err(|e| Error::io("<memory>", std::io::Error::other(e.to_string())))?;
        writer
            .finalize()
            .map_err(|e| Error::io("<memory>", std::io::Error::other(e.to_string())))?;
    }
    Ok(buf.into_inner())
}

pub fn save_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav_bytes(clip).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    atomic_write(path, &bytes)
}

/// Linear-interpolation resampling to `target_hz`. Output length is
/// `round(len * target / source)`; a constant signal stays exactly constant.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip> {
    if target_hz == 0 {
        return Err(Error::InvalidParameter("target rate must be positive".into()));
    }
    if target_hz == clip.sample_rate_hz {
        return Ok(clip.clone());
    }
    let ratio = f64::from(clip.sample_rate_hz) / f64::from(target_hz);
    let out_len = (clip.len() as f64 / ratio).round().max(1.0) as usize;
    Ok(AudioClip::from_parts_unchecked(
        interpolate(&clip.samples, ratio, out_len),
        target_hz,
    ))
}

/// Reads `out_len` points from `input` at positions `j * step`, linearly
/// interpolating between neighbours and holding the last sample past the end.
pub(crate) fn interpolate(input: &[f64], step: f64, out_len: usize) -> Vec<f64> {
    let last = input.len() - 1;
    (0..out_len)
        .map(|j| {
            let pos = j as f64 * step;
            let i = pos.floor() as usize;
            if i >= last {
                return input[last];
            }
            let frac = pos - i as f64;
            let (a, b) = (input[i], input[i + 1]);
            if frac == 0.0 {
                a
            } else {
                a + (b - a) * frac
            }
        })
        .collect()
}
