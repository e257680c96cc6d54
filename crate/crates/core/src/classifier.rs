//! k-nearest-neighbor voting over NCD distances.
//!
//! Neighbor selection orders training items by `(distance, index)`. Voting
//! picks the label with the most neighbors, then the smaller mean neighbor
//! distance, then the smaller label.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::compressor::CompressorConfig;
use crate::error::{Error, Result};
use crate::ncd::distance_matrix;

pub const DEFAULT_K: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    /// Position in the training corpus.
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Vote {
    pub count: usize,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction<L: Ord> {
    pub label: L,
    /// The `min(k, n)` nearest items, closest first.
    pub neighbors: Vec<Neighbor>,
    pub tally: BTreeMap<L, Vote>,
}

pub fn knn_predict<L: Ord + Clone>(distances: &[f64], labels: &[L], k: usize) -> Result<Prediction<L>> {
    if k < 1 {
        return Err(Error::InvalidK);
    }
    if distances.len() != labels.len() || distances.is_empty() {
        return Err(Error::LengthMismatch {
            distances: distances.len(),
            labels: labels.len(),
        });
    }

    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let neighbors: Vec<Neighbor> = order
        .into_iter()
        .take(k)
        .map(|index| Neighbor {
            index,
            distance: distances[index],
        })
        .collect();

    let mut sums: BTreeMap<L, (usize, f64)> = BTreeMap::new();
    for n in &neighbors {
        let slot = sums.entry(labels[n.index].clone()).or_insert((0, 0.0));
        slot.0 += 1;
        slot.1 += n.distance;
    }
    let tally: BTreeMap<L, Vote> = sums
        .into_iter()
        .map(|(label, (count, sum))| {
            (
                label,
                Vote {
                    count,
                    mean_distance: sum / count as f64,
                },
            )
        })
        .collect();

    // BTreeMap iterates labels in ascending order, so keeping the first of
    // equal candidates applies the final lexicographic rule.
    let mut best: Option<(&L, &Vote)> = None;
    for (label, vote) in &tally {
        let better = match best {
            None => true,
            Some((_, b)) => {
                vote.count > b.count
                    || (vote.count == b.count && vote.mean_distance < b.mean_distance)
            }
        };
        if better {
            best = Some((label, vote));
        }
    }
    let label = best.expect("at least one neighbor").0.clone();

    Ok(Prediction {
        label,
        neighbors,
        tally,
    })
}

/// Training items and their labels.
#[derive(Debug, Clone)]
pub struct LabeledCorpus<L> {
    items: Vec<Vec<u8>>,
    labels: Vec<L>,
}

impl<L: Ord + Clone> LabeledCorpus<L> {
    pub fn new(items: Vec<(Vec<u8>, L)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        let (items, labels) = items.into_iter().unzip();
        Ok(LabeledCorpus { items, labels })
    }

    pub fn items(&self) -> &[Vec<u8>] {
        &self.items
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Distinct labels, ascending.
    pub fn label_set(&self) -> Vec<L> {
        let mut set = self.labels.clone();
        set.sort();
        set.dedup();
        set
    }
}

/// Distance matrix followed by a kNN vote per query column.
pub fn classify_batch<L, Q>(
    corpus: &LabeledCorpus<L>,
    queries: &[Q],
    k: usize,
    cfg: &CompressorConfig,
) -> Result<Vec<Prediction<L>>>
where
    L: Ord + Clone + Send + Sync,
    Q: AsRef<[u8]> + Sync,
{
    if k < 1 {
        return Err(Error::InvalidK);
    }
    let matrix = distance_matrix(corpus.items(), queries, cfg)?;
    (0..matrix.cols())
        .into_par_iter()
        .map(|j| knn_predict(&matrix.column(j), corpus.labels(), k))
        .collect()
}
