//! Few-shot evaluation protocol.
//!
//! For every train ratio and repetition the corpus is split per class, the
//! training side becomes the kNN reference set and every held-out item is
//! classified. Accuracies are then averaged per ratio.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{knn_predict, LabeledCorpus, DEFAULT_K};
use crate::compressor::{compress_len, CompressorConfig};
use crate::error::{Error, Result};
use crate::imageprep::{Corpus, CorpusManifest};
use crate::ncd::distance_matrix;
use crate::seed::derive_seed;

pub const DEFAULT_REPETITIONS: u32 = 5;

/// Train fraction stored in thousandths, strictly between 0 and 1.
///
/// Keeping the ratio integral makes train counts and derived seeds exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrainRatio(u32);

impl TrainRatio {
    pub fn from_permille(permille: u32) -> Result<Self> {
        if permille == 0 || permille >= 1000 {
            return Err(Error::InvalidRatio(permille as f64 / 1000.0));
        }
        Ok(TrainRatio(permille))
    }

    /// Rounds to the nearest thousandth.
    pub fn new(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidRatio(ratio));
        }
        TrainRatio::from_permille((ratio * 1000.0).round() as u32)
            .map_err(|_| Error::InvalidRatio(ratio))
    }

    pub fn permille(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// `round(ratio × n)` with halves rounded up.
    pub fn train_count(self, n: usize) -> usize {
        (self.0 as usize * n + 500) / 1000
    }

    /// The nine-point grid 0.1, 0.2, …, 0.9.
    pub fn default_grid() -> Vec<TrainRatio> {
        (1..=9).map(|i| TrainRatio(i * 100)).collect()
    }
}

impl fmt::Display for TrainRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub ratio: TrainRatio,
    pub repetition: u32,
    pub base_seed: u64,
}

impl SplitSpec {
    /// Seed of the (ratio, repetition) cell. Depends only on the ratio value,
    /// never on its position in a grid.
    pub fn cell_seed(&self) -> u64 {
        derive_seed(
            self.base_seed,
            &[self.ratio.permille() as u64, self.repetition as u64],
        )
    }

    fn class_seed(&self, class: usize) -> u64 {
        derive_seed(self.cell_seed(), &[class as u64])
    }
}

/// Item ids, ascending within each side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split over per-item class indices.
pub fn split_labels(labels: &[usize], classes: &[String], spec: &SplitSpec) -> Result<Split> {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (ci, class) in classes.iter().enumerate() {
        let mut ids: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == ci).collect();
        let n_train = spec.ratio.train_count(ids.len());
        let n_test = ids.len() - n_train;
        if n_train == 0 || n_test == 0 {
            return Err(Error::DegenerateSplit {
                class: class.clone(),
                train: n_train,
                test: n_test,
            });
        }
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.class_seed(ci)));
        train.extend_from_slice(&ids[..n_train]);
        test.extend_from_slice(&ids[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn stratified_split(manifest: &CorpusManifest, spec: &SplitSpec) -> Result<Split> {
    let labels = manifest
        .records
        .iter()
        .map(|r| {
            manifest
                .class_index(&r.label)
                .ok_or_else(|| Error::UnknownLabel(r.label.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    split_labels(&labels, &manifest.classes, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub ratio: TrainRatio,
    pub repetition: u32,
    pub seed: u64,
    pub k: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioAggregate {
    pub ratio: TrainRatio,
    pub train_count: usize,
    pub test_count: usize,
    /// Number of repetitions aggregated.
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`.
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl RatioAggregate {
    pub fn from_runs(runs: &[&RunRecord]) -> Option<Self> {
        let first = runs.first()?;
        let accs: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
        Some(aggregate(first.ratio, first.train_count, first.test_count, &accs))
    }
}

/// Mean, sample std and range of `accs`; the mean is clamped into the range
/// to absorb summation rounding.
pub fn aggregate(ratio: TrainRatio, train_count: usize, test_count: usize, accs: &[f64]) -> RatioAggregate {
    let n = accs.len();
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (accs.iter().sum::<f64>() / n as f64).clamp(min, max);
    let std = if n > 1 {
        (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    RatioAggregate {
        ratio,
        train_count,
        test_count,
        n,
        mean,
        std,
        min,
        max,
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub ratios: Vec<TrainRatio>,
    pub repetitions: u32,
    pub k: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ratios: TrainRatio::default_grid(),
            repetitions: DEFAULT_REPETITIONS,
            k: DEFAULT_K,
            base_seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::InvalidRatio(f64::NAN));
        }
        if self.repetitions < 1 {
            return Err(Error::InvalidRepetitions);
        }
        if self.k < 1 {
            return Err(Error::InvalidK);
        }
        Ok(())
    }

    fn cells(&self) -> Vec<SplitSpec> {
        self.ratios
            .iter()
            .flat_map(|&ratio| {
                (0..self.repetitions).map(move |repetition| SplitSpec {
                    ratio,
                    repetition,
                    base_seed: self.base_seed,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub dataset: String,
    pub k: usize,
    pub gzip_level: u32,
    pub side: u32,
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<RatioAggregate>,
}

pub const CSV_HEADER: [&str; 14] = [
    "dataset",
    "ratio",
    "repetition",
    "seed",
    "k",
    "gzip_level",
    "side",
    "train_count",
    "test_count",
    "accuracy",
    "agg",
    "n",
    "mean",
    "std",
];

impl SweepResult {
    /// One row per (ratio, repetition) cell, then one `agg=1` row per ratio.
    /// Accuracies and aggregates carry six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{:.6},0,,,\n",
                self.dataset,
                r.ratio,
                r.repetition,
                r.seed,
                r.k,
                self.gzip_level,
                self.side,
                r.train_count,
                r.test_count,
                r.accuracy
            ));
        }
        for a in &self.aggregates {
            out.push_str(&format!(
                "{},{},,,{},{},{},{},{},,1,{},{:.6},{:.6}\n",
                self.dataset,
                a.ratio,
                self.k,
                self.gzip_level,
                self.side,
                a.train_count,
                a.test_count,
                a.n,
                a.mean,
                a.std
            ));
        }
        out
    }
}

/// Runs every (ratio, repetition) cell over `corpus`.
///
/// NCD between two items does not depend on the split, so the full item ×
/// item matrix is computed once and each cell reads its train × test block
/// from it. This gives the same numbers as classifying each cell from
/// scratch.
pub fn run_sweep(corpus: &Corpus, sweep: &SweepConfig, cfg: &CompressorConfig) -> Result<SweepResult> {
    sweep.validate()?;
    let manifest = corpus.manifest();
    let cells = sweep.cells();
    let splits = cells
        .iter()
        .map(|spec| split_labels(corpus.labels(), &manifest.classes, spec))
        .collect::<Result<Vec<_>>>()?;

    let full = distance_matrix(corpus.blobs(), corpus.blobs(), cfg)?;
    let names: Vec<&str> = (0..corpus.len()).map(|i| corpus.label_name(i)).collect();

    let records = cells
        .par_iter()
        .zip(splits.par_iter())
        .map(|(spec, split)| {
            let train_labels: Vec<&str> = split.train.iter().map(|&i| names[i]).collect();
            let mut correct = 0;
            for &q in &split.test {
                let column: Vec<f64> = split.train.iter().map(|&t| full.get(t, q)).collect();
                if knn_predict(&column, &train_labels, sweep.k)?.label == names[q] {
                    correct += 1;
                }
            }
            Ok(RunRecord {
                ratio: spec.ratio,
                repetition: spec.repetition,
                seed: spec.cell_seed(),
                k: sweep.k,
                train_count: split.train.len(),
                test_count: split.test.len(),
                correct,
                accuracy: correct as f64 / split.test.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let aggregates = sweep
        .ratios
        .iter()
        .filter_map(|&ratio| {
            let runs: Vec<&RunRecord> = records.iter().filter(|r| r.ratio == ratio).collect();
            RatioAggregate::from_runs(&runs)
        })
        .collect();

    Ok(SweepResult {
        dataset: manifest.dataset.clone(),
        k: sweep.k,
        gzip_level: cfg.level(),
        side: manifest.side,
        records,
        aggregates,
    })
}

/// Training corpus for one split, labels by class name.
pub fn training_corpus<'a>(corpus: &'a Corpus, split: &Split) -> Result<LabeledCorpus<&'a str>> {
    LabeledCorpus::new(
        split
            .train
            .iter()
            .map(|&i| (corpus.blobs()[i].clone(), corpus.label_name(i)))
            .collect(),
    )
}

pub const LABEL_ENCODING: &str = "one byte per item: index of its label in the sorted label set";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSizeReport {
    pub item_count: usize,
    /// Serialized items plus the label table.
    pub raw_bytes: u64,
    /// gzip of all items in corpus order followed by the label table.
    pub compressed_bytes: u64,
    pub label_encoding: String,
}

/// Storage needed for the kNN reference set.
pub fn model_size<L: Ord + Clone>(corpus: &LabeledCorpus<L>, cfg: &CompressorConfig) -> Result<ModelSizeReport> {
    let label_set = corpus.label_set();
    if label_set.len() > 256 {
        return Err(Error::TooManyClasses(label_set.len()));
    }
    let mut blob: Vec<u8> = corpus.items().concat();
    blob.extend(corpus.labels().iter().map(|l| {
        label_set.binary_search(l).expect("label comes from the corpus") as u8
    }));
    Ok(ModelSizeReport {
        item_count: corpus.len(),
        raw_bytes: blob.len() as u64,
        compressed_bytes: compress_len(&blob, cfg).bytes(),
        label_encoding: LABEL_ENCODING.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imageprep::ItemRecord;
    use proptest::prelude::*;
    use rand::Rng;

    fn manifest(counts: &[usize]) -> CorpusManifest {
        let classes: Vec<String> = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let records = counts
            .iter()
            .enumerate()
            .flat_map(|(ci, &n)| {
                (0..n).map(move |i| ItemRecord {
                    path: format!("c{ci}/{i}.png"),
                    label: format!("c{ci}"),
                    digest: String::new(),
                })
            })
            .collect();
        CorpusManifest {
            format_version: 1,
            dataset: "t".into(),
            classes,
            records,
            side: 32,
            grayscale_formula: String::new(),
            resize_kernel: String::new(),
            compressor: CompressorConfig::default(),
            compressor_identity: String::new(),
            per_class_cap: None,
            seed: 0,
        }
    }

    fn spec(permille: u32, repetition: u32) -> SplitSpec {
        SplitSpec {
            ratio: TrainRatio::from_permille(permille).unwrap(),
            repetition,
            base_seed: 1234,
        }
    }

    fn count_by_class(m: &CorpusManifest, ids: &[usize], class: &str) -> usize {
        ids.iter().filter(|&&i| m.records[i].label == class).count()
    }

    #[test]
    fn ratio_validation() {
        assert!(TrainRatio::new(0.0).is_err());
        assert!(TrainRatio::new(1.0).is_err());
        assert!(TrainRatio::new(f64::NAN).is_err());
        assert!(TrainRatio::new(0.0001).is_err());
        assert_eq!(TrainRatio::new(0.3).unwrap().permille(), 300);
        assert_eq!(TrainRatio::new(0.1 + 0.2).unwrap().to_string(), "0.3");
        assert_eq!(TrainRatio::default_grid().len(), 9);
    }

    #[test]
    fn train_count_rounds_half_up() {
        let half = TrainRatio::from_permille(500).unwrap();
        assert_eq!(half.train_count(5), 3);
        assert_eq!(TrainRatio::from_permille(100).unwrap().train_count(80), 8);
        assert_eq!(TrainRatio::from_permille(900).unwrap().train_count(80), 72);
        assert_eq!(TrainRatio::from_permille(250).unwrap().train_count(2), 1);
    }

    #[test]
    fn ten_percent_of_eighty_per_class() {
        let m = manifest(&[80, 80]);
        let s = stratified_split(&m, &spec(100, 0)).unwrap();
        assert_eq!(count_by_class(&m, &s.train, "c0"), 8);
        assert_eq!(count_by_class(&m, &s.train, "c1"), 8);
        assert_eq!(count_by_class(&m, &s.test, "c0"), 72);
        assert_eq!(count_by_class(&m, &s.test, "c1"), 72);
    }

    #[test]
    fn ninety_percent_of_eighty_per_class() {
        let m = manifest(&[80, 80]);
        let s = stratified_split(&m, &spec(900, 0)).unwrap();
        assert_eq!(s.train.len(), 144);
        assert_eq!(count_by_class(&m, &s.test, "c0"), 8);
        assert_eq!(count_by_class(&m, &s.test, "c1"), 8);
    }

    #[test]
    fn split_is_deterministic_and_varies_by_repetition() {
        let m = manifest(&[20, 20]);
        assert_eq!(stratified_split(&m, &spec(500, 2)).unwrap(), stratified_split(&m, &spec(500, 2)).unwrap());
        assert_ne!(stratified_split(&m, &spec(500, 2)).unwrap(), stratified_split(&m, &spec(500, 3)).unwrap());
    }

    #[test]
    fn degenerate_split_is_reported() {
        let m = manifest(&[10, 1]);
        match stratified_split(&m, &spec(500, 0)) {
            Err(Error::DegenerateSplit { class, train, test }) => {
                assert_eq!((class.as_str(), train, test), ("c1", 1, 0));
            }
            other => panic!("{other:?}"),
        }
        assert!(stratified_split(&manifest(&[10, 10]), &spec(10, 0)).is_err());
    }

    #[test]
    fn aggregate_single_repetition() {
        let r = TrainRatio::from_permille(100).unwrap();
        let a = aggregate(r, 16, 144, &[0.75]);
        assert_eq!((a.n, a.mean, a.std), (1, 0.75, 0.0));
    }

    #[test]
    fn aggregate_sample_std() {
        let r = TrainRatio::from_permille(100).unwrap();
        let a = aggregate(r, 16, 144, &[0.5, 0.7, 0.9]);
        assert!((a.mean - 0.7).abs() < 1e-12);
        assert!((a.std - 0.2).abs() < 1e-12);
        let flat = aggregate(r, 16, 144, &[0.7; 5]);
        assert_eq!(flat.mean, 0.7);
    }

    #[test]
    fn model_size_of_one_image() {
        let corpus = LabeledCorpus::new(vec![(vec![7u8; 1024], "a")]).unwrap();
        let r = model_size(&corpus, &CompressorConfig::default()).unwrap();
        assert_eq!(r.raw_bytes, 1025);
        assert_eq!(r.item_count, 1);
    }

    #[test]
    fn model_size_of_zero_images_is_tiny() {
        let corpus =
            LabeledCorpus::new((0..16).map(|i| (vec![0u8; 1024], if i < 8 { "a" } else { "b" })).collect()).unwrap();
        let r = model_size(&corpus, &CompressorConfig::default()).unwrap();
        assert_eq!(r.raw_bytes, 16 * 1024 + 16);
        assert!(r.compressed_bytes < 100, "{}", r.compressed_bytes);
    }

    #[test]
    fn csv_layout() {
        let ratio = TrainRatio::from_permille(100).unwrap();
        let rec = RunRecord {
            ratio,
            repetition: 0,
            seed: 9,
            k: 1,
            train_count: 16,
            test_count: 144,
            correct: 112,
            accuracy: 112.0 / 144.0,
        };
        let result = SweepResult {
            dataset: "rice".into(),
            k: 1,
            gzip_level: 6,
            side: 32,
            aggregates: vec![aggregate(ratio, 16, 144, &[rec.accuracy])],
            records: vec![rec],
        };
        assert_eq!(
            result.to_csv(),
            "dataset,ratio,repetition,seed,k,gzip_level,side,train_count,test_count,accuracy,agg,n,mean,std\n\
             rice,0.1,0,9,1,6,32,16,144,0.777778,0,,,\n\
             rice,0.1,,,1,6,32,16,144,,1,1,0.777778,0.000000\n"
        );
    }

    proptest! {
        #[test]
        fn splits_are_sound(
            counts in proptest::collection::vec(2usize..40, 2..5),
            permille in 1u32..1000,
            repetition in 0u32..10,
        ) {
            let m = manifest(&counts);
            let s = spec(permille, repetition);
            match stratified_split(&m, &s) {
                Ok(split) => {
                    let mut all: Vec<usize> = split.train.iter().chain(&split.test).copied().collect();
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..m.records.len()).collect::<Vec<_>>());
                    for (ci, &n) in counts.iter().enumerate() {
                        let c = format!("c{ci}");
                        prop_assert_eq!(count_by_class(&m, &split.train, &c), s.ratio.train_count(n));
                    }
                }
                Err(Error::DegenerateSplit { .. }) => {
                    let degenerate = counts.iter().any(|&n| {
                        let t = s.ratio.train_count(n);
                        t == 0 || t == n
                    });
                    prop_assert!(degenerate);
                }
                Err(e) => prop_assert!(false, "{}", e),
            }
        }

        #[test]
        fn aggregate_mean_within_range(accs in proptest::collection::vec(0u32..=144, 1..8)) {
            let values: Vec<f64> = accs.iter().map(|&c| c as f64 / 144.0).collect();
            let a = aggregate(TrainRatio::from_permille(100).unwrap(), 16, 144, &values);
            prop_assert!(a.min <= a.mean && a.mean <= a.max);
            prop_assert!(a.std >= 0.0);
        }
    }

    #[test]
    fn sweep_matches_per_cell_classification() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = manifest(&[6, 6]);
        let blobs: Vec<Vec<u8>> = (0..12)
            .map(|i| {
                if i < 6 {
                    vec![rng.random_range(0..8u8); 256]
                } else {
                    (0..256).map(|_| rng.random()).collect()
                }
            })
            .collect();
        m.side = 16;
        for (r, b) in m.records.iter_mut().zip(&blobs) {
            r.digest = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(b));
        }
        let corpus = Corpus::new(m, blobs).unwrap();
        let cfg = CompressorConfig::default();
        let sweep = SweepConfig {
            ratios: vec![TrainRatio::from_permille(300).unwrap(), TrainRatio::from_permille(700).unwrap()],
            repetitions: 2,
            k: 3,
            base_seed: 11,
        };
        let result = run_sweep(&corpus, &sweep, &cfg).unwrap();
        assert_eq!(result.records.len(), 4);
        for rec in &result.records {
            let spec = SplitSpec { ratio: rec.ratio, repetition: rec.repetition, base_seed: 11 };
            let split = stratified_split(corpus.manifest(), &spec).unwrap();
            let train = training_corpus(&corpus, &split).unwrap();
            let queries: Vec<&Vec<u8>> = split.test.iter().map(|&i| &corpus.blobs()[i]).collect();
            let preds = crate::classifier::classify_batch(&train, &queries, 3, &cfg).unwrap();
            let correct = preds
                .iter()
                .zip(&split.test)
                .filter(|(p, &q)| p.label == corpus.label_name(q))
                .count();
            assert_eq!(rec.correct, correct);
            assert_eq!(rec.seed, spec.cell_seed());
        }
        assert_eq!(result.aggregates.len(), 2);
        assert_eq!(result, run_sweep(&corpus, &sweep, &cfg).unwrap());
    }
}
