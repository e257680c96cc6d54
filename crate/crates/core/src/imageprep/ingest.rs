use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{canonicalize, decode_image, DEFAULT_SIDE};
use crate::compressor::CompressorConfig;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::seed::derive_seed;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_DIR: &str = "blobs";
pub const GRAYSCALE_FORMULA_ID: &str = "bt601-luma-0.299-0.587-0.114-round-half-away";
pub const RESIZE_KERNEL_ID: &str = "area-box-exact-integer";
const FORMAT_VERSION: u32 = 1;
const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "pgm"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    /// `class/file`, relative to the dataset root.
    pub path: String,
    pub label: String,
    /// SHA-256 of the canonical blob, lowercase hex.
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub dataset: String,
    pub classes: Vec<String>,
    pub records: Vec<ItemRecord>,
    pub side: u32,
    pub grayscale_formula: String,
    pub resize_kernel: String,
    pub compressor: CompressorConfig,
    pub compressor_identity: String,
    pub per_class_cap: Option<usize>,
    pub seed: u64,
}

impl CorpusManifest {
    /// Manifest JSON with object keys sorted.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest is plain data");
        let mut s = serde_json::to_string_pretty(&value).expect("manifest is plain data");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: CorpusManifest =
            serde_json::from_str(text).map_err(|e| Error::MalformedManifest(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    /// SHA-256 of the sorted-key JSON; identifies the corpus in run manifests.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    fn check(&self) -> Result<()> {
        self.compressor.validate()?;
        if self.side == 0 {
            return Err(Error::InvalidSide(0));
        }
        let declared: BTreeSet<&str> = self.classes.iter().map(String::as_str).collect();
        if declared.len() != self.classes.len() {
            return Err(Error::MalformedManifest("duplicate class name".into()));
        }
        for r in &self.records {
            if !declared.contains(r.label.as_str()) {
                return Err(Error::UnknownLabel(r.label.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Class subdirectories to use; every subdirectory when `None`.
    pub classes: Option<Vec<String>>,
    pub per_class_cap: Option<usize>,
    pub seed: u64,
    pub side: u32,
    pub compressor: CompressorConfig,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            classes: None,
            per_class_cap: None,
            seed: 0,
            side: DEFAULT_SIDE,
            compressor: CompressorConfig::default(),
        }
    }
}

/// Ingested corpus held in memory until [`PreparedCorpus::write`].
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub manifest: CorpusManifest,
    /// Canonical bytes, parallel to `manifest.records`.
    pub blobs: Vec<Vec<u8>>,
}

impl PreparedCorpus {
    /// Writes `blobs/<digest>.bin` for every item, then `manifest.json`.
    pub fn write(&self, out: &Path) -> Result<()> {
        let blob_dir = out.join(BLOB_DIR);
        fs::create_dir_all(&blob_dir).map_err(|e| Error::io(&blob_dir, e))?;
        for (record, blob) in self.manifest.records.iter().zip(&self.blobs) {
            let path = blob_dir.join(format!("{}.bin", record.digest));
            if !path.exists() {
                write_atomic(&path, blob)?;
            }
        }
        write_atomic(&out.join(MANIFEST_FILE), self.manifest.to_json().as_bytes())
    }
}

fn list_dirs(root: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

fn list_images(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if path.is_file() && is_image {
            if let Some(name) = path.file_name() {
                names.push(name.to_string_lossy().into_owned());
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Seeded uniform draw of `cap` names, returned in listing order.
fn sample(names: Vec<String>, cap: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, names.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| names[i].clone()).collect()
}

/// Scans `root/<class>/*.{png,jpg,jpeg,pgm}`, samples, and canonicalizes.
///
/// Files are taken in lexicographic order of their names, so a fixed seed
/// selects the same images on every machine. Any undecodable image aborts
/// the whole ingest.
pub fn ingest_dataset(root: &Path, opts: &IngestOptions) -> Result<PreparedCorpus> {
    opts.compressor.validate()?;
    if opts.side == 0 {
        return Err(Error::InvalidSide(0));
    }
    let classes = match &opts.classes {
        Some(c) => c.clone(),
        None => list_dirs(root)?,
    };
    if classes.len() < 2 {
        return Err(Error::TooFewClasses(classes.len()));
    }

    let mut jobs: Vec<(String, String)> = Vec::new();
    for (ci, class) in classes.iter().enumerate() {
        let dir = root.join(class);
        if !dir.is_dir() {
            return Err(Error::MissingClassDir(dir));
        }
        let mut names = list_images(&dir)?;
        if let Some(cap) = opts.per_class_cap {
            if names.len() < cap {
                return Err(Error::InsufficientImages {
                    class: class.clone(),
                    found: names.len(),
                    wanted: cap,
                });
            }
            names = sample(names, cap, derive_seed(opts.seed, &[ci as u64]));
        }
        jobs.extend(names.into_iter().map(|n| (class.clone(), n)));
    }

    let blobs: Vec<Vec<u8>> = jobs
        .par_iter()
        .map(|(class, name)| {
            let raw = decode_image(&root.join(class).join(name))?;
            Ok(canonicalize(&raw, opts.side)?.into_bytes())
        })
        .collect::<Result<_>>()?;

    let records = jobs
        .into_iter()
        .zip(&blobs)
        .map(|((class, name), blob)| ItemRecord {
            path: format!("{class}/{name}"),
            label: class,
            digest: hex::encode(Sha256::digest(blob)),
        })
        .collect();

    let dataset = root
        .canonicalize()
        .unwrap_or_else(|_| root.to_path_buf())
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());

    Ok(PreparedCorpus {
        manifest: CorpusManifest {
            format_version: FORMAT_VERSION,
            dataset,
            classes,
            records,
            side: opts.side,
            grayscale_formula: GRAYSCALE_FORMULA_ID.to_string(),
            resize_kernel: RESIZE_KERNEL_ID.to_string(),
            compressor: opts.compressor,
            compressor_identity: opts.compressor.identity(),
            per_class_cap: opts.per_class_cap,
            seed: opts.seed,
        },
        blobs,
    })
}

/// A prepared corpus loaded back from its cache directory.
#[derive(Debug, Clone)]
pub struct Corpus {
    manifest: CorpusManifest,
    blobs: Vec<Vec<u8>>,
    labels: Vec<usize>,
}

impl Corpus {
    pub fn new(manifest: CorpusManifest, blobs: Vec<Vec<u8>>) -> Result<Self> {
        manifest.check()?;
        if blobs.len() != manifest.records.len() {
            return Err(Error::MalformedManifest(format!(
                "{} records but {} blobs",
                manifest.records.len(),
                blobs.len()
            )));
        }
        let expected = manifest.side as usize * manifest.side as usize;
        for (r, b) in manifest.records.iter().zip(&blobs) {
            if b.len() != expected || hex::encode(Sha256::digest(b)) != r.digest {
                return Err(Error::DigestMismatch {
                    digest: r.digest.clone(),
                });
            }
        }
        let labels = manifest
            .records
            .iter()
            .map(|r| manifest.class_index(&r.label).expect("checked above"))
            .collect();
        Ok(Corpus {
            manifest,
            blobs,
            labels,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = CorpusManifest::from_json(&text)?;
        let blobs = manifest
            .records
            .iter()
            .map(|r| {
                let p: PathBuf = dir.join(BLOB_DIR).join(format!("{}.bin", r.digest));
                fs::read(&p).map_err(|e| Error::io(&p, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(manifest, blobs)
    }

    pub fn manifest(&self) -> &CorpusManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.blobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    pub fn blobs(&self) -> &[Vec<u8>] {
        &self.blobs
    }

    /// Class index of every item.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_name(&self, item: usize) -> &str {
        &self.manifest.classes[self.labels[item]]
    }
}
