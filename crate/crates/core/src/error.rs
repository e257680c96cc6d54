use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gzip level {0} is outside 1..=9")]
    InvalidLevel(u32),

    #[error("training set is empty")]
    EmptyTrainSet,

    #[error("query set is empty")]
    EmptyQuerySet,

    #[error("unsupported channel count {0} (expected 1, 3 or 4)")]
    UnsupportedChannelCount(u8),

    #[error("invalid image dimensions {width}x{height}x{channels} for {len} samples")]
    InvalidImage {
        width: u32,
        height: u32,
        channels: u8,
        len: usize,
    },

    #[error("image is not grayscale ({0} channels)")]
    NotGrayscale(u8),

    #[error("canonical side must be at least 1, got {0}")]
    InvalidSide(u32),

    #[error("class directory {0} is missing")]
    MissingClassDir(PathBuf),

    #[error("cannot decode image {path}: {reason}")]
    UndecodableImage { path: PathBuf, reason: String },

    #[error("class {class} has {found} images, {wanted} requested")]
    InsufficientImages {
        class: String,
        found: usize,
        wanted: usize,
    },

    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("blob {digest} does not match its manifest digest")]
    DigestMismatch { digest: String },

    #[error("k must be at least 1")]
    InvalidK,

    #[error("{distances} distances but {labels} labels")]
    LengthMismatch { distances: usize, labels: usize },

    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),

    #[error("train ratio {0} is outside (0, 1)")]
    InvalidRatio(f64),

    #[error("repetitions must be at least 1")]
    InvalidRepetitions,

    #[error("class {class} would contribute {train} train and {test} test items")]
    DegenerateSplit {
        class: String,
        train: usize,
        test: usize,
    },

    #[error("label table supports at most 256 classes, got {0}")]
    TooManyClasses(usize),

    #[error("malformed results csv: {0}")]
    MalformedCsv(String),

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
