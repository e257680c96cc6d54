//! `gik` command surface: prepare, ncd, matrix, classify, eval, report.
//!
//! Exit codes: 0 success, 1 invalid invocation, 2 runtime failure.

pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gik::classifier::knn_predict;
use gik::compressor::{CompressorConfig, DEFAULT_LEVEL};
use gik::evalharness::{
    model_size, split_labels, training_corpus, SplitSpec, SweepConfig, TrainRatio,
    DEFAULT_REPETITIONS,
};
use gik::fsutil::write_atomic;
use gik::imageprep::{canonicalize, decode_image, ingest_dataset, Corpus, IngestOptions, DEFAULT_SIDE};
use gik::parallel::with_threads;
use gik::{distance_matrix, ncd, run_sweep, Error};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gik", version, about = "gzip NCD + kNN image classifier")]
pub struct Cli {
    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Canonicalize a `root/<class>/*` image tree into a cache directory.
    Prepare(PrepareArgs),
    /// NCD between two files' raw bytes.
    Ncd(NcdArgs),
    /// Train × query NCD matrix as CSV.
    Matrix(MatrixArgs),
    /// Classify one image against a prepared cache.
    Classify(ClassifyArgs),
    /// Run the few-shot split sweep.
    Eval(EvalArgs),
    /// Summarize a results CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Images sampled per class.
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SIDE)]
    pub side: u32,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub gzip_level: u32,
    /// Comma-separated class subdirectories (default: all).
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct NcdArgs {
    pub file_a: PathBuf,
    pub file_b: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    pub gzip_level: u32,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// Prepared cache; every item is both a train row and a query column.
    #[arg(long, conflicts_with_all = ["train", "query"])]
    pub cache: Option<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub train: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub query: Vec<PathBuf>,
    /// Overrides the cache's level; default 6 for raw files.
    #[arg(long)]
    pub gzip_level: Option<u32>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// `start:end:step` or a comma list.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub ratios: String,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    pub reps: u32,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the level recorded in the cache manifest.
    #[arg(long)]
    pub gzip_level: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub results: PathBuf,
    /// Model-size JSON; defaults to `<results stem>.model_size.json` if present.
    #[arg(long)]
    pub model_size: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn level(level: u32) -> CliResult<CompressorConfig> {
    CompressorConfig::gzip(level).map_err(|e| usage(e.to_string()))
}

fn positive(name: &str, value: usize) -> CliResult<()> {
    if value == 0 {
        return Err(usage(format!("--{name} must be at least 1")));
    }
    Ok(())
}

/// Parses `start:end:step` (inclusive) or `a,b,c`. Grid points are computed
/// in thousandths so `0.1:0.9:0.1` yields exactly nine ratios.
pub fn parse_ratios(text: &str) -> CliResult<Vec<TrainRatio>> {
    let to_ratio = |s: &str| -> CliResult<TrainRatio> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad ratio {s:?}")))?;
        TrainRatio::new(v).map_err(|e| usage(e.to_string()))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let ratios = match parts.as_slice() {
        [start, end, step] => {
            let (start, end) = (to_ratio(start)?, to_ratio(end)?);
            let step: f64 = step
                .trim()
                .parse()
                .map_err(|_| usage(format!("bad ratio step {step:?}")))?;
            let step = (step * 1000.0).round();
            if !(step >= 1.0) {
                return Err(usage("ratio step must be positive"));
            }
            let step = step as u32;
            (start.permille()..=end.permille())
                .step_by(step as usize)
                .map(TrainRatio::from_permille)
                .collect::<Result<Vec<_>, _>>()?
        }
        [list] => list.split(',').map(to_ratio).collect::<CliResult<Vec<_>>>()?,
        _ => return Err(usage(format!("bad ratio grid {text:?}"))),
    };
    if ratios.is_empty() {
        return Err(usage(format!("ratio grid {text:?} is empty")));
    }
    Ok(ratios)
}

/// Config snapshot written next to every output.
#[derive(Debug, Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    codec: String,
    config: C,
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_run_manifest<C: Serialize>(path: &Path, command: &str, cfg: &CompressorConfig, config: C) -> CliResult<()> {
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        codec: cfg.identity(),
        config,
    };
    let value = serde_json::to_value(&manifest).expect("plain data");
    let text = serde_json::to_string_pretty(&value).expect("plain data") + "\n";
    Ok(write_atomic(path, text.as_bytes())?)
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Runtime(Error::Io {
        path: path.to_path_buf(),
        source: e,
    }))
}

fn emit(out: &mut (dyn Write + Send), text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| {
        CliError::Runtime(Error::Io {
            path: "<stdout>".into(),
            source: e,
        })
    })
}

fn cmd_prepare(args: &PrepareArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let compressor = level(args.gzip_level)?;
    if args.side == 0 {
        return Err(usage("--side must be at least 1"));
    }
    if let Some(cap) = args.cap {
        positive("cap", cap)?;
    }
    let opts = IngestOptions {
        classes: args.classes.clone(),
        per_class_cap: args.cap,
        seed: args.seed,
        side: args.side,
        compressor,
    };
    let prepared = ingest_dataset(&args.root, &opts)?;
    prepared.write(&args.out)?;
    write_run_manifest(
        &args.out.join("run.json"),
        "prepare",
        &compressor,
        serde_json::json!({
            "root": args.root.display().to_string(),
            "cap": args.cap,
            "seed": args.seed,
            "side": args.side,
            "gzip_level": args.gzip_level,
            "classes": prepared.manifest.classes,
            "corpus_digest": prepared.manifest.digest(),
        }),
    )?;
    emit(
        out,
        &format!(
            "prepared {} images in {} classes into {}\n",
            prepared.manifest.records.len(),
            prepared.manifest.classes.len(),
            args.out.display()
        ),
    )
}

fn cmd_ncd(args: &NcdArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let cfg = level(args.gzip_level)?;
    let a = read_file(&args.file_a)?;
    let b = read_file(&args.file_b)?;
    emit(out, &format!("{}\n", ncd(&a, &b, &cfg)))
}

fn cmd_matrix(args: &MatrixArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let (cfg, train_ids, train, query_ids, queries) = match &args.cache {
        Some(dir) => {
            if let Some(l) = args.gzip_level {
                level(l)?;
            }
            let corpus = Corpus::load(dir)?;
            let cfg = match args.gzip_level {
                Some(l) => level(l)?,
                None => corpus.manifest().compressor,
            };
            let ids: Vec<String> = corpus.manifest().records.iter().map(|r| r.path.clone()).collect();
            let blobs = corpus.blobs().to_vec();
            (cfg, ids.clone(), blobs.clone(), ids, blobs)
        }
        None => {
            let cfg = level(args.gzip_level.unwrap_or(DEFAULT_LEVEL))?;
            if args.train.is_empty() || args.query.is_empty() {
                return Err(usage("matrix needs --cache, or both --train and --query"));
            }
            let load = |paths: &[PathBuf]| -> CliResult<(Vec<String>, Vec<Vec<u8>>)> {
                let ids = paths.iter().map(|p| p.display().to_string()).collect();
                let data = paths.iter().map(|p| read_file(p)).collect::<CliResult<_>>()?;
                Ok((ids, data))
            };
            let (tids, tdata) = load(&args.train)?;
            let (qids, qdata) = load(&args.query)?;
            (cfg, tids, tdata, qids, qdata)
        }
    };
    let matrix = distance_matrix(&train, &queries, &cfg)?;
    let mut csv = String::from("train");
    for q in &query_ids {
        csv.push(',');
        csv.push_str(q);
    }
    csv.push('\n');
    for (i, t) in train_ids.iter().enumerate() {
        csv.push_str(t);
        for j in 0..matrix.cols() {
            csv.push_str(&format!(",{:.6}", matrix.get(i, j)));
        }
        csv.push('\n');
    }
    match &args.out {
        Some(path) => {
            write_atomic(path, csv.as_bytes())?;
            write_run_manifest(
                &sidecar(path, ".run.json"),
                "matrix",
                &cfg,
                serde_json::json!({ "train": train_ids, "query": query_ids }),
            )
        }
        None => emit(out, &csv),
    }
}

#[derive(Debug, Serialize)]
struct NeighborRow<'a> {
    rank: usize,
    index: usize,
    path: &'a str,
    label: &'a str,
    distance: f64,
}

#[derive(Debug, Serialize)]
struct TallyRow {
    count: usize,
    mean_distance: f64,
}

#[derive(Debug, Serialize)]
struct ClassifyOutput<'a> {
    label: &'a str,
    k: usize,
    neighbors: Vec<NeighborRow<'a>>,
    tally: std::collections::BTreeMap<&'a str, TallyRow>,
}

fn cmd_classify(args: &ClassifyArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    positive("k", args.k)?;
    let corpus = Corpus::load(&args.model)?;
    let m = corpus.manifest();
    let query = canonicalize(&decode_image(&args.input)?, m.side)?.into_bytes();
    let matrix = distance_matrix(corpus.blobs(), &[query], &m.compressor)?;
    let labels: Vec<&str> = (0..corpus.len()).map(|i| corpus.label_name(i)).collect();
    let p = knn_predict(&matrix.column(0), &labels, args.k)?;
    let report = ClassifyOutput {
        label: p.label,
        k: args.k,
        neighbors: p
            .neighbors
            .iter()
            .enumerate()
            .map(|(rank, n)| NeighborRow {
                rank: rank + 1,
                index: n.index,
                path: &m.records[n.index].path,
                label: labels[n.index],
                distance: n.distance,
            })
            .collect(),
        tally: p
            .tally
            .iter()
            .map(|(l, v)| {
                (
                    *l,
                    TallyRow {
                        count: v.count,
                        mean_distance: v.mean_distance,
                    },
                )
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&report).expect("plain data") + "\n";
    emit(out, &text)
}

fn cmd_eval(args: &EvalArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let ratios = parse_ratios(&args.ratios)?;
    positive("k", args.k)?;
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if let Some(l) = args.gzip_level {
        level(l)?;
    }

    let corpus = Corpus::load(&args.cache)?;
    let cfg = match args.gzip_level {
        Some(l) => level(l)?,
        None => corpus.manifest().compressor,
    };
    let sweep = SweepConfig {
        ratios: ratios.clone(),
        repetitions: args.reps,
        k: args.k,
        base_seed: args.seed,
    };
    let result = run_sweep(&corpus, &sweep, &cfg)?;

    // Size of the smallest training set, first repetition.
    let smallest = SplitSpec {
        ratio: *ratios.iter().min().expect("non-empty grid"),
        repetition: 0,
        base_seed: args.seed,
    };
    let split = split_labels(corpus.labels(), &corpus.manifest().classes, &smallest)?;
    let size = model_size(&training_corpus(&corpus, &split)?, &cfg)?;

    let csv = result.to_csv();
    let svg = args.svg.as_ref().map(|_| {
        plot::accuracy_curve(
            &format!("Mean accuracy: {}", corpus.manifest().dataset),
            &result.aggregates,
        )
    });

    write_atomic(&args.out, csv.as_bytes())?;
    if let (Some(path), Some(svg)) = (&args.svg, &svg) {
        write_atomic(path, svg.as_bytes())?;
    }
    let size_json = serde_json::to_string_pretty(&size).expect("plain data") + "\n";
    write_atomic(&sidecar(&args.out, ".model_size.json"), size_json.as_bytes())?;
    write_run_manifest(
        &sidecar(&args.out, ".run.json"),
        "eval",
        &cfg,
        serde_json::json!({
            "cache": args.cache.display().to_string(),
            "corpus_digest": corpus.manifest().digest(),
            "ratios": ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            "reps": args.reps,
            "k": args.k,
            "seed": args.seed,
            "gzip_level": cfg.level(),
            "side": corpus.manifest().side,
        }),
    )?;

    let parsed = report::parse_results(&csv)?;
    emit(out, &report::summary_table(&parsed))?;
    emit(out, &report::size_table(&parsed, &size))
}

fn cmd_report(args: &ReportArgs, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let text = fs::read_to_string(&args.results).map_err(|e| {
        CliError::Runtime(Error::Io {
            path: args.results.clone(),
            source: e,
        })
    })?;
    let parsed = report::parse_results(&text)?;
    emit(out, &report::summary_table(&parsed))?;

    let size_path = args
        .model_size
        .clone()
        .or_else(|| Some(sidecar(&args.results, ".model_size.json")).filter(|p| p.exists()));
    if let Some(path) = size_path {
        let raw = read_file(&path)?;
        let size = serde_json::from_slice(&raw)
            .map_err(|e| CliError::Runtime(Error::MalformedManifest(format!("{}: {e}", path.display()))))?;
        emit(out, &report::size_table(&parsed, &size))?;
    }
    if let Some(path) = &args.svg {
        let svg = plot::accuracy_curve(&format!("Mean accuracy: {}", parsed.dataset), &parsed.aggregates);
        write_atomic(path, svg.as_bytes())?;
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut (dyn Write + Send)) -> CliResult<()> {
    if cli.threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    with_threads(cli.threads, || match &cli.command {
        Command::Prepare(a) => cmd_prepare(a, out),
        Command::Ncd(a) => cmd_ncd(a, out),
        Command::Matrix(a) => cmd_matrix(a, out),
        Command::Classify(a) => cmd_classify(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Report(a) => cmd_report(a, out),
    })?
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let _ = write!(err, "{e}");
            return EXIT_USAGE;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_nine_points() {
        let r = parse_ratios("0.1:0.9:0.1").unwrap();
        assert_eq!(r.len(), 9);
        assert_eq!(r[0].permille(), 100);
        assert_eq!(r[8].permille(), 900);
    }

    #[test]
    fn list_and_invalid_grids() {
        assert_eq!(parse_ratios("0.25,0.5").unwrap().len(), 2);
        assert!(parse_ratios("1.0").is_err());
        assert!(parse_ratios("0.1:1.0:0.1").is_err());
        assert!(parse_ratios("0.1:0.9:0").is_err());
        assert!(parse_ratios("a:b").is_err());
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("out/results.csv"), ".run.json"), PathBuf::from("out/results.run.json"));
    }
}
