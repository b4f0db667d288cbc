//! Frames x coefficients matrix plus its binary (`ARPF`) and CSV exports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

pub const ARPF_MAGIC: &[u8; 4] = b"ARPF";
pub const ARPF_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    MelSpectrogram,
    Mfcc,
}

impl FeatureKind {
    fn code(self) -> u8 {
        match self {
            FeatureKind::MelSpectrogram => 0,
            FeatureKind::Mfcc => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureKind::MelSpectrogram),
            1 => Some(FeatureKind::Mfcc),
            _ => None,
        }
    }

    /// Short tag used in file names (`mel`, `mfcc`).
    pub fn tag(self) -> &'static str {
        match self {
            FeatureKind::MelSpectrogram => "mel",
            FeatureKind::Mfcc => "mfcc",
        }
    }
}

/// Row-major: row `f` holds the `C` coefficients of frame `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    kind: FeatureKind,
    frames: usize,
    coeffs: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(kind: FeatureKind, frames: usize, coeffs: usize, data: Vec<f64>) -> Result<Self> {
        if frames == 0 || coeffs == 0 {
            return Err(Error::ShapeMismatch(format!(
                "feature matrix must be at least 1x1, got {frames}x{coeffs}"
            )));
        }
        if data.len() != frames * coeffs {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {frames}x{coeffs} matrix",
                data.len()
            )));
        }
        Ok(Self {
            kind,
            frames,
            coeffs,
            data,
        })
    }

    pub fn from_rows(kind: FeatureKind, rows: &[Vec<f64>]) -> Result<Self> {
        let coeffs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != coeffs) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(kind, rows.len(), coeffs, rows.concat())
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn coeffs(&self) -> usize {
        self.coeffs
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, frame: usize, coeff: usize) -> f64 {
        self.data[frame * self.coeffs + coeff]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.coeffs..(frame + 1) * self.coeffs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.coeffs)
    }

    /// Position of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.coeffs, i % self.coeffs))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 8);
        out.extend_from_slice(ARPF_MAGIC);
        out.extend_from_slice(&ARPF_VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.coeffs as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != ARPF_MAGIC {
            return Err(Error::BadFeatureFile("missing ARPF header".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != ARPF_VERSION {
            return Err(Error::BadFeatureFile(format!("unsupported version {version}")));
        }
        let kind = FeatureKind::from_code(bytes[6])
            .ok_or_else(|| Error::BadFeatureFile(format!("unknown kind {}", bytes[6])))?;
        let frames = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
        let coeffs = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
        let body = &bytes[HEADER_LEN..];
        if body.len() != frames * coeffs * 8 {
            return Err(Error::BadFeatureFile(format!(
                "{} payload bytes for a {frames}x{coeffs} matrix",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(kind, frames, coeffs, data)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Header `frame,c0,c1,...`; values use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame");
        for c in 0..self.coeffs {
            let _ = write!(out, ",c{c}");
        }
        out.push('\n');
        for (f, row) in self.rows().enumerate() {
            let _ = write!(out, "{f}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_csv().as_bytes())
    }
}
