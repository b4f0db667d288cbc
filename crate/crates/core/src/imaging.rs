//! Colormap rendering of feature matrices.
//!
//! Values are min-max scaled onto a fixed 256-entry table: the smallest entry
//! of the matrix gets color 0, the largest color 255, everything in between is
//! linearly interpolated and rounded half-up. Images are laid out with time on
//! the x axis and coefficient 0 on the bottom row.

use std::io::BufWriter;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};
use crate::fsutil::atomic_write;

const PLASMA_TABLE: &str = include_str!("../assets/plasma.txt");

static PLASMA: LazyLock<Colormap> = LazyLock::new(|| {
    let entries: Vec<[u8; 3]> = PLASMA_TABLE
        .lines()
        .map(|line| {
            let mut it = line.split_whitespace().map(|v| v.parse::<u8>().unwrap());
            [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()]
        })
        .collect();
    Colormap::new(entries).expect("bundled colormap is valid")
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colormap {
    entries: Vec<[u8; 3]>,
}

impl Colormap {
    pub fn new(entries: Vec<[u8; 3]>) -> Result<Self> {
        if entries.len() != 256 {
            return Err(Error::InvalidParameter(format!(
                "colormap needs 256 entries, got {}",
                entries.len()
            )));
        }
        if entries[0] == entries[255] {
            return Err(Error::InvalidParameter(
                "colormap endpoints must differ".into(),
            ));
        }
        Ok(Self { entries })
    }

    /// The bundled perceptually ordered table (matplotlib's plasma, 8-bit).
    pub fn plasma() -> Self {
        PLASMA.clone()
    }

    pub fn color(&self, index: u8) -> [u8; 3] {
        self.entries[usize::from(index)]
    }

    /// Reverse lookup; `None` for colors outside the table.
    pub fn index_of(&self, rgb: [u8; 3]) -> Option<u8> {
        self.entries.iter().position(|c| *c == rgb).map(|i| i as u8)
    }
}

/// Color indices with the same frame-major layout as the source matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMatrix {
    pub frames: usize,
    pub coeffs: usize,
    pub data: Vec<u8>,
}

impl IndexMatrix {
    pub fn get(&self, frame: usize, coeff: usize) -> u8 {
        self.data[frame * self.coeffs + coeff]
    }
}

/// `round_half_up(255 * (v - min) / (max - min))`, or all zeros when the
/// matrix is constant.
pub fn to_color_indices(m: &FeatureMatrix) -> Result<IndexMatrix> {
    if let Some((frame, coeff)) = m.first_non_finite() {
        return Err(Error::NonFiniteEntry { frame, coeff });
    }
    let (min, max) = value_range(m);
    let range = max - min;
    let data = m
        .data()
        .iter()
        .map(|&v| {
            if range > 0.0 {
                (255.0 * ((v - min) / range) + 0.5).floor().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    Ok(IndexMatrix {
        frames: m.frames(),
        coeffs: m.coeffs(),
        data,
    })
}

fn value_range(m: &FeatureMatrix) -> (f64, f64) {
    m.data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSidecar {
    pub kind: FeatureKind,
    #[serde(rename = "F")]
    pub frames: usize,
    #[serde(rename = "C")]
    pub coeffs: usize,
    pub value_min: f64,
    pub value_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColormapImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB, top row first.
    pub pixels: Vec<u8>,
    pub value_min: f64,
    pub value_max: f64,
}

impl ColormapImage {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Frame `f`, coefficient `c` lands at column `f`, row `C - 1 - c`.
pub fn colorize(m: &FeatureMatrix, cmap: &Colormap) -> Result<ColormapImage> {
    let idx = to_color_indices(m)?;
    let (width, height) = (m.frames(), m.coeffs());
    let mut pixels = vec![0u8; width * height * 3];
    for f in 0..width {
        for c in 0..height {
            let y = height - 1 - c;
            let at = 3 * (y * width + f);
            pixels[at..at + 3].copy_from_slice(&cmap.color(idx.get(f, c)));
        }
    }
    let (value_min, value_max) = value_range(m);
    Ok(ColormapImage {
        width,
        height,
        pixels,
        value_min,
        value_max,
    })
}

pub fn encode_png(img: &ColormapImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(BufWriter::new(&mut out), img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| Error::io("<png>", std::io::Error::other(e.to_string()));
        let mut writer = enc.write_header().map_err(to_io)?;
        writer.write_image_data(&img.pixels).map_err(to_io)?;
        writer.finish().map_err(to_io)?;
    }
    Ok(out)
}

/// Writes the PNG plus a `<stem>.json` sidecar next to it.
pub fn render_png(m: &FeatureMatrix, cmap: &Colormap, path: impl AsRef<Path>) -> Result<ColormapImage> {
    let path = path.as_ref();
    let img = colorize(m, cmap)?;
    let bytes = encode_png(&img).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    atomic_write(path, &bytes)?;
    let sidecar = ImageSidecar {
        kind: m.kind(),
        frames: m.frames(),
        coeffs: m.coeffs(),
        value_min: img.value_min,
        value_max: img.value_max,
    };
    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    atomic_write(&path.with_extension("json"), &json)?;
    Ok(img)
}

/// Decodes an 8-bit RGB PNG into `(width, height, pixels)`.
pub fn decode_png(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |e: png::DecodingError| Error::io(path, std::io::Error::other(e.to_string()));
    let mut reader = png::Decoder::new(std::io::BufReader::new(file))
        .read_info()
        .map_err(bad)?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf).map_err(bad)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedEncoding(format!(
            "{:?}/{:?} PNG",
            info.color_type, info.bit_depth
        )));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

/// Recovers the color-index matrix from a rendered PNG.
pub fn read_png_indices(path: impl AsRef<Path>, cmap: &Colormap) -> Result<IndexMatrix> {
    let (width, height, pixels) = decode_png(path)?;
    let mut data = vec![0u8; width * height];
    for y in 0..height {
        for x in 0..width {
            let at = 3 * (y * width + x);
            let rgb = [pixels[at], pixels[at + 1], pixels[at + 2]];
            let idx = cmap.index_of(rgb).ok_or_else(|| {
                Error::InvalidParameter(format!("pixel ({x}, {y}) is not a colormap entry"))
            })?;
            data[x * height + (height - 1 - y)] = idx;
        }
    }
    Ok(IndexMatrix {
        frames: width,
        coeffs: height,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(FeatureKind::Mfcc, rows).unwrap()
    }

    #[test]
    fn worked_example() {
        let idx = to_color_indices(&mat(&[vec![0.0, 5.0], vec![10.0, 2.5]])).unwrap();
        assert_eq!(idx.data, vec![0, 128, 255, 64]);
    }

    #[test]
    fn constant_matrix_maps_to_zero() {
        let idx = to_color_indices(&mat(&[vec![3.0; 4], vec![3.0; 4]])).unwrap();
        assert!(idx.data.iter().all(|&i| i == 0));
    }

    #[test]
    fn non_finite_rejected() {
        let err = to_color_indices(&mat(&[vec![0.0, f64::NAN]])).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEntry { frame: 0, coeff: 1 }));
    }

    #[test]
    fn bundled_colormap() {
        let cmap = Colormap::plasma();
        assert_ne!(cmap.color(0), cmap.color(255));
        for i in 0..=255u8 {
            assert_eq!(cmap.index_of(cmap.color(i)), Some(i));
        }
        assert!(Colormap::new(vec![[0, 0, 0]; 255]).is_err());
        assert!(Colormap::new(vec![[7, 7, 7]; 256]).is_err());
    }

    #[test]
    fn layout_transposes_with_low_coefficients_at_bottom() {
        let cmap = Colormap::plasma();
        // frames x coeffs = 3 x 2
        let m = mat(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]);
        let img = colorize(&m, &cmap).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        let idx = to_color_indices(&m).unwrap();
        for f in 0..3 {
            for c in 0..2 {
                assert_eq!(img.pixel(f, 2 - 1 - c), cmap.color(idx.get(f, c)));
            }
        }
    }

    #[test]
    fn two_pixel_image() {
        let cmap = Colormap::plasma();
        let img = colorize(&mat(&[vec![0.0], vec![1.0]]), &cmap).unwrap();
        assert_eq!(img.pixel(0, 0), cmap.color(0));
        assert_eq!(img.pixel(1, 0), cmap.color(255));
    }
}
