//! Image canonicalization: decode, grayscale, area resample, serialize.
//!
//! All arithmetic is integer so the canonical bytes are identical on every
//! platform.

mod ingest;

pub use ingest::{
    ingest_dataset, Corpus, CorpusManifest, IngestOptions, ItemRecord, PreparedCorpus,
    GRAYSCALE_FORMULA_ID, MANIFEST_FILE, RESIZE_KERNEL_ID,
};

use std::path::Path;

use image::{DynamicImage, ImageReader};

use crate::error::{Error, Result};

pub const DEFAULT_SIDE: u32 = 32;

/// Decoded image with interleaved 8-bit samples, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    width: u32,
    height: u32,
    channels: u8,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: u32, height: u32, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if !matches!(channels, 1 | 3 | 4) {
            return Err(Error::UnsupportedChannelCount(channels));
        }
        let expected = width as usize * height as usize * channels as usize;
        if width == 0 || height == 0 || pixels.len() != expected {
            return Err(Error::InvalidImage {
                width,
                height,
                channels,
                len: pixels.len(),
            });
        }
        Ok(RawImage {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// Square grayscale raster of `side × side` samples; the unit of classification.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalImage {
    side: u32,
    pixels: Vec<u8>,
}

impl CanonicalImage {
    /// Wraps already-canonical bytes, e.g. a cached blob.
    pub fn from_bytes(side: u32, pixels: Vec<u8>) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidSide(side));
        }
        if pixels.len() != side as usize * side as usize {
            return Err(Error::InvalidImage {
                width: side,
                height: side,
                channels: 1,
                len: pixels.len(),
            });
        }
        Ok(CanonicalImage { side, pixels })
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Headerless row-major samples; always `side²` bytes.
    pub fn serialize(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }
}

/// BT.601 luma, `round(0.299 R + 0.587 G + 0.114 B)` with halves rounded
/// away from zero. Evaluated in thousandths so it is exact. A fourth channel
/// is ignored.
pub fn to_grayscale(img: &RawImage) -> RawImage {
    if img.channels == 1 {
        return img.clone();
    }
    let pixels = img
        .pixels
        .chunks_exact(img.channels as usize)
        .map(|px| {
            let weighted = 299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32;
            ((weighted + 500) / 1000) as u8
        })
        .collect();
    RawImage {
        width: img.width,
        height: img.height,
        channels: 1,
        pixels,
    }
}

/// Source contributions to one output sample along one axis.
///
/// Coordinates are scaled by `src * dst` so that every pixel edge lands on an
/// integer: source pixel `s` covers `[s·dst, (s+1)·dst)` and output pixel `o`
/// covers `[o·src, (o+1)·src)`. Weights for one output sum to `src`.
fn axis_weights(src: u32, dst: u32) -> Vec<Vec<(usize, u64)>> {
    let (src, dst) = (src as u64, dst as u64);
    (0..dst)
        .map(|o| {
            let (lo, hi) = (o * src, (o + 1) * src);
            let first = lo / dst;
            let last = (hi - 1) / dst;
            (first..=last)
                .map(|s| {
                    let overlap = hi.min((s + 1) * dst) - lo.max(s * dst);
                    (s as usize, overlap)
                })
                .collect()
        })
        .collect()
}

/// Area-weighted box resampling to `side × side`.
///
/// Each output sample is the coverage-weighted mean of the source region it
/// maps onto, rounded half away from zero. Upscaling uses the same rule, so a
/// source pixel simply spreads over the outputs it overlaps.
pub fn resize(img: &RawImage, side: u32) -> Result<CanonicalImage> {
    if img.channels != 1 {
        return Err(Error::NotGrayscale(img.channels));
    }
    if side == 0 {
        return Err(Error::InvalidSide(side));
    }
    let w = img.width as usize;
    let xs = axis_weights(img.width, side);
    let ys = axis_weights(img.height, side);
    let total = img.width as u64 * img.height as u64;

    let mut pixels = Vec::with_capacity(side as usize * side as usize);
    for row in &ys {
        for col in &xs {
            let mut acc: u64 = 0;
            for &(sy, wy) in row {
                let line = &img.pixels[sy * w..(sy + 1) * w];
                let mut line_acc: u64 = 0;
                for &(sx, wx) in col {
                    line_acc += wx * line[sx] as u64;
                }
                acc += wy * line_acc;
            }
            pixels.push(((2 * acc + total) / (2 * total)) as u8);
        }
    }
    Ok(CanonicalImage { side, pixels })
}

pub fn canonicalize(img: &RawImage, side: u32) -> Result<CanonicalImage> {
    resize(&to_grayscale(img), side)
}

pub fn decode_image(path: &Path) -> Result<RawImage> {
    let undecodable = |reason: String| Error::UndecodableImage {
        path: path.to_path_buf(),
        reason,
    };
    let decoded = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| undecodable(e.to_string()))?;
    from_dynamic(decoded)
}

pub fn decode_image_bytes(bytes: &[u8]) -> Result<RawImage> {
    let decoded = image::load_from_memory(bytes).map_err(|e| Error::UndecodableImage {
        path: "<memory>".into(),
        reason: e.to_string(),
    })?;
    from_dynamic(decoded)
}

fn from_dynamic(img: DynamicImage) -> Result<RawImage> {
    let (width, height) = (img.width(), img.height());
    let color = img.color();
    let (channels, pixels) = match (color.has_color(), color.has_alpha()) {
        (false, _) => (1, img.into_luma8().into_raw()),
        (true, false) => (3, img.into_rgb8().into_raw()),
        (true, true) => (4, img.into_rgba8().into_raw()),
    };
    RawImage::new(width, height, channels, pixels)
}
