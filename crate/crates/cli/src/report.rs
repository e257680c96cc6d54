//! Reads `results.csv` back and renders the per-ratio summary and the
//! accuracy/size table.

use std::collections::BTreeMap;

use gik::evalharness::{aggregate, ModelSizeReport, RatioAggregate, TrainRatio};
use gik::Error;

type Result<T> = std::result::Result<T, Error>;

/// One cell row from the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub ratio: TrainRatio,
    pub repetition: u32,
    pub train_count: usize,
    pub test_count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResults {
    pub dataset: String,
    pub cells: Vec<CellRow>,
    pub aggregates: Vec<RatioAggregate>,
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedCsv(msg.into())
}

fn field<'a>(row: &'a csv::StringRecord, idx: &BTreeMap<&str, usize>, name: &str, line: usize) -> Result<&'a str> {
    idx.get(name)
        .and_then(|&i| row.get(i))
        .ok_or_else(|| malformed(format!("line {line}: missing {name}")))
}

fn num<T: std::str::FromStr>(text: &str, name: &str, line: usize) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| malformed(format!("line {line}: bad {name} {text:?}")))
}

/// Parses the sweep CSV. Aggregate rows are taken as written; when a ratio
/// has none they are recomputed from its cell rows.
pub fn parse_results(text: &str) -> Result<ParsedResults> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(malformed("empty file"));
    }
    let idx: BTreeMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    for required in ["dataset", "ratio", "train_count", "test_count", "accuracy", "agg", "n", "mean", "std"] {
        if !idx.contains_key(required) {
            return Err(malformed(format!("missing column {required}")));
        }
    }

    let mut dataset = None;
    let mut cells = Vec::new();
    let mut written = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(e.to_string()))?;
        dataset.get_or_insert_with(|| row.get(idx["dataset"]).unwrap_or_default().to_string());
        let ratio = TrainRatio::new(num(field(&row, &idx, "ratio", line)?, "ratio", line)?)
            .map_err(|e| malformed(format!("line {line}: {e}")))?;
        let train_count = num(field(&row, &idx, "train_count", line)?, "train_count", line)?;
        let test_count = num(field(&row, &idx, "test_count", line)?, "test_count", line)?;
        match field(&row, &idx, "agg", line)? {
            "1" => {
                let n: usize = num(field(&row, &idx, "n", line)?, "n", line)?;
                let mean: f64 = num(field(&row, &idx, "mean", line)?, "mean", line)?;
                let std: f64 = num(field(&row, &idx, "std", line)?, "std", line)?;
                written.push(RatioAggregate {
                    ratio,
                    train_count,
                    test_count,
                    n,
                    mean,
                    std,
                    min: mean,
                    max: mean,
                });
            }
            "0" => {
                let accuracy: f64 = num(field(&row, &idx, "accuracy", line)?, "accuracy", line)?;
                if !(0.0..=1.0).contains(&accuracy) {
                    return Err(malformed(format!("line {line}: accuracy {accuracy} outside [0, 1]")));
                }
                cells.push(CellRow {
                    ratio,
                    repetition: num(field(&row, &idx, "repetition", line)?, "repetition", line)?,
                    train_count,
                    test_count,
                    accuracy,
                });
            }
            other => return Err(malformed(format!("line {line}: agg must be 0 or 1, got {other:?}"))),
        }
    }
    if cells.is_empty() && written.is_empty() {
        return Err(malformed("no data rows"));
    }

    let mut ratios: Vec<TrainRatio> = cells.iter().map(|c| c.ratio).chain(written.iter().map(|a| a.ratio)).collect();
    ratios.sort();
    ratios.dedup();
    let aggregates = ratios
        .into_iter()
        .map(|ratio| {
            let accs: Vec<f64> = cells.iter().filter(|c| c.ratio == ratio).map(|c| c.accuracy).collect();
            match written.iter().find(|a| a.ratio == ratio) {
                Some(a) if accs.is_empty() => a.clone(),
                Some(a) => {
                    let from_cells = aggregate(ratio, a.train_count, a.test_count, &accs);
                    RatioAggregate {
                        min: from_cells.min,
                        max: from_cells.max,
                        ..a.clone()
                    }
                }
                None => {
                    let first = cells.iter().find(|c| c.ratio == ratio).expect("ratio came from cells");
                    aggregate(ratio, first.train_count, first.test_count, &accs)
                }
            }
        })
        .collect();

    Ok(ParsedResults {
        dataset: dataset.unwrap_or_default(),
        cells,
        aggregates,
    })
}

/// Decimal units, two decimals: `1.62 kB`, `2.40 MB`.
pub fn human_bytes(bytes: u64) -> String {
    match bytes {
        b if b >= 1_000_000 => format!("{:.2} MB", b as f64 / 1e6),
        b if b >= 1_000 => format!("{:.2} kB", b as f64 / 1e3),
        b => format!("{b} B"),
    }
}

pub fn summary_table(results: &ParsedResults) -> String {
    let mut out = format!("dataset: {}\n", results.dataset);
    for a in &results.aggregates {
        out.push_str(&format!(
            "ratio {} | {} train images | {:.2}% | ± {:.2}% | n={}\n",
            a.ratio,
            a.train_count,
            a.mean * 100.0,
            a.std * 100.0,
            a.n
        ));
    }
    out
}

/// Accuracy and storage side by side. Accuracy is taken from the ratio
/// whose training set has as many items as the size report.
pub fn size_table(results: &ParsedResults, size: &ModelSizeReport) -> String {
    let accuracy = results
        .aggregates
        .iter()
        .find(|a| a.train_count == size.item_count)
        .map(|a| format!("{:.2}", a.mean * 100.0))
        .unwrap_or_else(|| "n/a".to_string());
    format!(
        "model | accuracy (%) | model size | raw size\n\
         gik ({} train images) | {} | {} | {}\n",
        size.item_count,
        accuracy,
        human_bytes(size.compressed_bytes),
        human_bytes(size.raw_bytes)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "dataset,ratio,repetition,seed,k,gzip_level,side,train_count,test_count,accuracy,agg,n,mean,std\n";

    #[test]
    fn single_aggregate_row_formats_like_table() {
        let text = format!("{HEADER}rice,0.1,,,1,6,32,16,144,,1,5,0.779100,0.010000\n");
        let parsed = parse_results(&text).unwrap();
        let table = summary_table(&parsed);
        assert!(table.contains("16 train images | 77.91%"), "{table}");
    }

    #[test]
    fn empty_input_is_malformed() {
        assert!(matches!(parse_results(""), Err(Error::MalformedCsv(_))));
        assert!(matches!(parse_results(HEADER), Err(Error::MalformedCsv(_))));
    }

    #[test]
    fn missing_column_and_bad_values() {
        assert!(parse_results("dataset,ratio\nx,0.1\n").is_err());
        let bad = format!("{HEADER}rice,0.1,0,1,1,6,32,16,144,abc,0,,,\n");
        assert!(parse_results(&bad).is_err());
        let out_of_range = format!("{HEADER}rice,1.5,0,1,1,6,32,16,144,0.5,0,,,\n");
        assert!(parse_results(&out_of_range).is_err());
    }

    #[test]
    fn aggregates_recomputed_when_absent() {
        let text = format!(
            "{HEADER}d,0.5,0,1,1,6,32,8,8,0.5,0,,,\nd,0.5,1,2,1,6,32,8,8,1.0,0,,,\n"
        );
        let parsed = parse_results(&text).unwrap();
        assert_eq!(parsed.aggregates.len(), 1);
        assert_eq!(parsed.aggregates[0].mean, 0.75);
        assert_eq!(parsed.aggregates[0].n, 2);
    }

    #[test]
    fn byte_units() {
        assert_eq!(human_bytes(999), "999 B");
        assert_eq!(human_bytes(1620), "1.62 kB");
        assert_eq!(human_bytes(2_400_000), "2.40 MB");
    }

    #[test]
    fn size_table_pairs_accuracy_with_size() {
        let text = format!("{HEADER}rice,0.1,,,1,6,32,16,144,,1,5,0.779100,0.010000\n");
        let parsed = parse_results(&text).unwrap();
        let size = ModelSizeReport {
            item_count: 16,
            raw_bytes: 16400,
            compressed_bytes: 1620,
            label_encoding: String::new(),
        };
        let t = size_table(&parsed, &size);
        assert!(t.contains("| 77.91 | 1.62 kB | 16.40 kB"), "{t}");
    }
}
