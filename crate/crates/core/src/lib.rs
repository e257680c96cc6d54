//! Parameter-free image classification with gzip compression distance.
//!
//! Images are reduced to small grayscale rasters, compared with the
//! Normalized Compression Distance
//!
//! ```text
//! NCD(x, y) = (C(xy) - min(C(x), C(y))) / max(C(x), C(y))
//! ```
//!
//! where `C` is the length of a gzip stream, and labeled by k-nearest-neighbor
//! vote. Compressed length stands in for Kolmogorov complexity, which is
//! uncomputable. [`evalharness`] runs the few-shot protocol of repeated
//! stratified splits over a grid of train ratios.

pub mod classifier;
pub mod compressor;
pub mod error;
pub mod evalharness;
pub mod fsutil;
pub mod imageprep;
pub mod ncd;
pub mod parallel;
pub mod seed;

pub use classifier::{classify_batch, knn_predict, LabeledCorpus, Prediction};
pub use compressor::{compress_len, compress_len_concat, CompressedLength, CompressorConfig};
pub use error::{Error, Result};
pub use evalharness::{model_size, run_sweep, stratified_split, SplitSpec, SweepConfig, SweepResult, TrainRatio};
pub use imageprep::{canonicalize, ingest_dataset, CanonicalImage, Corpus, CorpusManifest, RawImage};
pub use ncd::{distance_matrix, ncd, DistanceMatrix, NcdValue};
