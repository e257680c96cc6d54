//! Compressed-length oracle.
//!
//! The length of a gzip member is used as a computable stand-in for the
//! Kolmogorov complexity of its input. Every length produced here comes from
//! a fully deterministic stream: the gzip header carries `MTIME = 0` and a
//! fixed OS byte, so the same bytes and config give the same length on every
//! machine.

use std::fmt;
use std::io::{self, Write};

use flate2::{Compression, GzBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed gzip framing: 10 byte header plus 8 byte CRC32/ISIZE trailer.
pub const GZIP_FRAMING_BYTES: u64 = 18;

/// Default DEFLATE effort, the same default the reference `gzip` tool uses.
pub const DEFAULT_LEVEL: u32 = 6;

/// OS byte written when header normalization is on (RFC 1952: 0 = FAT).
const NORMALIZED_OS: u8 = 0;
/// OS byte written when normalization is off (RFC 1952: 3 = Unix).
const HOST_OS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Codec {
    /// RFC 1952 gzip member wrapping an RFC 1951 DEFLATE stream.
    GzipDeflate,
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Codec::GzipDeflate => f.write_str("gzip-deflate"),
        }
    }
}

/// Compressor selection and effort.
///
/// The modification time in the gzip header is always zero. With
/// `header_normalization` on, the OS byte is zeroed as well; with it off the
/// Unix OS byte is written. Neither choice changes any compressed length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompressorConfig {
    codec: Codec,
    level: u32,
    header_normalization: bool,
}

impl CompressorConfig {
    /// Gzip config at `level`, which must be in `1..=9`.
    pub fn gzip(level: u32) -> Result<Self> {
        if !(1..=9).contains(&level) {
            return Err(Error::InvalidLevel(level));
        }
        Ok(CompressorConfig {
            codec: Codec::GzipDeflate,
            level,
            header_normalization: true,
        })
    }

    pub fn with_header_normalization(mut self, on: bool) -> Self {
        self.header_normalization = on;
        self
    }

    pub fn codec(&self) -> Codec {
        self.codec
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn header_normalization(&self) -> bool {
        self.header_normalization
    }

    /// Identifies the encoder implementation and settings. Absolute lengths
    /// differ between DEFLATE encoders, so this string belongs in every run
    /// manifest.
    pub fn identity(&self) -> String {
        format!(
            "{}/flate2-rust_backend(miniz_oxide)/level={}/mtime=0/os={}",
            self.codec,
            self.level,
            if self.header_normalization {
                NORMALIZED_OS
            } else {
                HOST_OS
            }
        )
    }

    /// Validates a config that arrived through deserialization.
    pub fn validate(&self) -> Result<()> {
        CompressorConfig::gzip(self.level).map(|_| ())
    }
}

impl Default for CompressorConfig {
    fn default() -> Self {
        CompressorConfig {
            codec: Codec::GzipDeflate,
            level: DEFAULT_LEVEL,
            header_normalization: true,
        }
    }
}

/// Byte count of a compressed stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompressedLength(pub u64);

impl CompressedLength {
    pub fn bytes(self) -> u64 {
        self.0
    }
}

impl fmt::Display for CompressedLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} B", self.0)
    }
}

/// Sink that only counts what is written to it.
#[derive(Default)]
struct ByteCounter(u64);

impl Write for ByteCounter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0 += buf.len() as u64;
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn encode<W: Write>(sink: W, data: &[u8], cfg: &CompressorConfig) -> W {
    let os = if cfg.header_normalization {
        NORMALIZED_OS
    } else {
        HOST_OS
    };
    let mut enc = GzBuilder::new()
        .mtime(0)
        .operating_system(os)
        .write(sink, Compression::new(cfg.level));
    // Writing into a Vec or a counter cannot fail.
    enc.write_all(data).expect("in-memory gzip write");
    enc.finish().expect("in-memory gzip finish")
}

/// Full gzip member for `data`.
pub fn compress(data: &[u8], cfg: &CompressorConfig) -> Vec<u8> {
    encode(Vec::with_capacity(data.len() / 2 + 64), data, cfg)
}

/// Length of the gzip member for `data`, without keeping the output.
pub fn compress_len(data: &[u8], cfg: &CompressorConfig) -> CompressedLength {
    CompressedLength(encode(ByteCounter::default(), data, cfg).0)
}

/// Compressed length of `a` immediately followed by `b`, no separator.
pub fn compress_len_concat(a: &[u8], b: &[u8], cfg: &CompressorConfig) -> CompressedLength {
    let mut joined = Vec::with_capacity(a.len() + b.len());
    joined.extend_from_slice(a);
    joined.extend_from_slice(b);
    compress_len(&joined, cfg)
}
