//! Normalized Compression Distance.
//!
//! `NCD(x, y) = (C(xy) - min(C(x), C(y))) / max(C(x), C(y))` where `C` is the
//! gzip length from [`crate::compressor`]. `xy` is the raw concatenation in
//! that order; no separator and no symmetrization.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compressor::{compress_len, compress_len_concat, CompressedLength, CompressorConfig};
use crate::error::{Error, Result};

/// Upper sanity bound. Ideal compressors give at most ~1; real ones overshoot a little.
pub const NCD_CEILING: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct NcdValue(pub f64);

impl NcdValue {
    pub fn value(self) -> f64 {
        self.0
    }

    /// True when the value lies in `[0, NCD_CEILING]`.
    pub fn is_sane(self) -> bool {
        (0.0..=NCD_CEILING).contains(&self.0)
    }
}

impl fmt::Display for NcdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// NCD from the three compressed lengths.
pub fn ncd_from_lengths(cx: CompressedLength, cy: CompressedLength, cxy: CompressedLength) -> NcdValue {
    let (lo, hi) = if cx <= cy { (cx, cy) } else { (cy, cx) };
    // hi >= 18 for every gzip stream, so the division is finite.
    NcdValue((cxy.bytes() as f64 - lo.bytes() as f64) / hi.bytes() as f64)
}

pub fn ncd(x: &[u8], y: &[u8], cfg: &CompressorConfig) -> NcdValue {
    ncd_from_lengths(
        compress_len(x, cfg),
        compress_len(y, cfg),
        compress_len_concat(x, y, cfg),
    )
}

/// Train × query distances, row-major: row `i` is training item `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, train: usize, query: usize) -> f64 {
        assert!(train < self.rows && query < self.cols, "index out of range");
        self.values[train * self.cols + query]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Distances from every training item to query `query`.
    pub fn column(&self, query: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, query)).collect()
    }
}

/// Computes every `ncd(train[i], queries[j])`.
///
/// Single-item lengths are computed once per sequence; only the
/// concatenations are compressed per cell. Cells are evaluated on the
/// current rayon pool and each is a pure function of its inputs, so the
/// result does not depend on the number of threads.
pub fn distance_matrix<T, Q>(train: &[T], queries: &[Q], cfg: &CompressorConfig) -> Result<DistanceMatrix>
where
    T: AsRef<[u8]> + Sync,
    Q: AsRef<[u8]> + Sync,
{
    if train.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let train_len: Vec<CompressedLength> = train
        .par_iter()
        .map(|t| compress_len(t.as_ref(), cfg))
        .collect();
    let query_len: Vec<CompressedLength> = queries
        .par_iter()
        .map(|q| compress_len(q.as_ref(), cfg))
        .collect();

    let cols = queries.len();
    let values = (0..train.len() * cols)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / cols, cell % cols);
            let joint = compress_len_concat(train[i].as_ref(), queries[j].as_ref(), cfg);
            ncd_from_lengths(train_len[i], query_len[j], joint).value()
        })
        .collect();

    Ok(DistanceMatrix {
        rows: train.len(),
        cols,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::with_threads;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded(seed: u64, n: usize) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random()).collect()
    }

    fn cfg() -> CompressorConfig {
        CompressorConfig::default()
    }

    #[test]
    fn equal_lengths_give_zero() {
        let l = CompressedLength(100);
        assert_eq!(ncd_from_lengths(l, l, l).value(), 0.0);
    }

    #[test]
    fn formula_uses_min_and_max() {
        let v = ncd_from_lengths(CompressedLength(40), CompressedLength(100), CompressedLength(120));
        assert_eq!(v.value(), 0.8);
        let w = ncd_from_lengths(CompressedLength(100), CompressedLength(40), CompressedLength(120));
        assert_eq!(v, w);
    }

    #[test]
    fn self_distance_is_small() {
        let x = seeded(7, 4096);
        let v = ncd(&x, &x, &cfg()).value();
        assert!((0.0..=0.1).contains(&v), "{v}");
    }

    #[test]
    fn independent_noise_is_far() {
        let v = ncd(&seeded(7, 4096), &seeded(8, 4096), &cfg()).value();
        assert!((0.9..=1.1).contains(&v), "{v}");
    }

    #[test]
    fn empty_sets_are_rejected() {
        let none: [&[u8]; 0] = [];
        assert!(matches!(
            distance_matrix(&none, &[b"q".as_slice()], &cfg()),
            Err(Error::EmptyTrainSet)
        ));
        assert!(matches!(
            distance_matrix(&[b"t".as_slice()], &none, &cfg()),
            Err(Error::EmptyQuerySet)
        ));
    }

    #[test]
    fn one_by_one_matches_scalar() {
        let x = seeded(1, 1024);
        let m = distance_matrix(&[&x], &[&x], &cfg()).unwrap();
        assert_eq!((m.rows(), m.cols()), (1, 1));
        assert_eq!(m.get(0, 0).to_bits(), ncd(&x, &x, &cfg()).value().to_bits());
    }

    #[test]
    fn rows_are_training_items() {
        let a = seeded(1, 600);
        let b = vec![5u8; 600];
        let q = seeded(3, 600);
        let m = distance_matrix(&[&a, &b], &[&q], &cfg()).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 1));
        assert_eq!(m.column(0), vec![ncd(&a, &q, &cfg()).value(), ncd(&b, &q, &cfg()).value()]);
    }

    #[test]
    fn matrix_equals_scalar_recomputation() {
        let train: Vec<Vec<u8>> = (0..10).map(|s| seeded(s, 1024)).collect();
        let queries: Vec<Vec<u8>> = (100..110).map(|s| seeded(s, 1024)).collect();
        let m = distance_matrix(&train, &queries, &cfg()).unwrap();
        for (i, t) in train.iter().enumerate() {
            for (j, q) in queries.iter().enumerate() {
                let v = m.get(i, j);
                assert!(NcdValue(v).is_sane(), "{v}");
                assert_eq!(v.to_bits(), ncd(t, q, &cfg()).value().to_bits());
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let items: Vec<Vec<u8>> = (0..8)
            .map(|s| if s % 2 == 0 { seeded(s, 900) } else { vec![s as u8; 900] })
            .collect();
        let one = with_threads(Some(1), || distance_matrix(&items, &items, &cfg())).unwrap().unwrap();
        let four = with_threads(Some(4), || distance_matrix(&items, &items, &cfg())).unwrap().unwrap();
        assert_eq!(one, four);
    }
}
