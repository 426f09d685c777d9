//! CSV series and label files, JSON-lines traces and JSON documents.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use hdp_slds::gibbs::TraceRecord;
use hdp_slds::linalg::Vector;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vector>,
}

impl Series {
    pub fn new(prefix: &str, rows: Vec<Vector>) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        Series {
            columns: (1..=d).map(|i| format!("{prefix}{i}")).collect(),
            rows,
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Header row naming the components, then one row of numbers per time step.
pub fn read_series(path: &Path) -> Result<Series> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if columns.is_empty() {
        return Err(CliError::io(path, "no columns"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| CliError::io(path, format!("row {}: expected {} finite numbers", i + 2, columns.len())))?;
        rows.push(Vector::from_vec(vals));
    }
    if rows.is_empty() {
        return Err(CliError::io(path, "no data rows"));
    }
    Ok(Series { columns, rows })
}

pub fn write_series(path: &Path, series: &Series) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    w.write_record(&series.columns).map_err(err)?;
    for row in &series.rows {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Single-column file of 1-based labels under a header line. When
/// `allow_missing`, blank lines and `NA` mark unlabelled steps.
fn read_label_column(path: &Path, allow_missing: bool) -> Result<Vec<Option<usize>>> {
    let mut lines = BufReader::new(open(path)?).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| CliError::io(path, e))?
        .ok_or_else(|| CliError::io(path, "empty file"))?;
    if header.contains(',') {
        return Err(CliError::io(path, "expected a single label column"));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let cell = line.trim();
        if allow_missing && (cell.is_empty() || cell == "NA") {
            out.push(None);
            continue;
        }
        match cell.parse::<usize>() {
            Ok(k) if k >= 1 => out.push(Some(k - 1)),
            _ => return Err(CliError::io(path, format!("line {}: labels are integers starting at 1", i + 2))),
        }
    }
    if out.is_empty() {
        return Err(CliError::io(path, "no labels"));
    }
    Ok(out)
}

/// 0-based labels from a 1-based file.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    Ok(read_label_column(path, false)?.into_iter().flatten().collect())
}

pub fn read_supervision(path: &Path) -> Result<Vec<Option<usize>>> {
    read_label_column(path, true)
}

/// Writes 0-based labels as 1-based.
pub fn write_labels(path: &Path, z: &[usize]) -> Result<()> {
    let mut w = create(path)?;
    let mut body = String::with_capacity(4 * z.len() + 2);
    body.push_str("z\n");
    for k in z {
        body.push_str(&(k + 1).to_string());
        body.push('\n');
    }
    w.write_all(body.as_bytes()).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct TraceLine {
    schema_version: u32,
    #[serde(flatten)]
    record: TraceRecord,
}

pub fn trace_path(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain-{chain}.jsonl"))
}

pub fn write_traces(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut w = create(path)?;
    for record in records {
        let line = serde_json::to_string(&TraceLine {
            schema_version: TRACE_SCHEMA_VERSION,
            record: record.clone(),
        })
        .map_err(|e| CliError::io(path, e))?;
        writeln!(w, "{line}").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_traces(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine =
            serde_json::from_str(&line).map_err(|e| CliError::io(path, format!("line {}: {e}", i + 1)))?;
        if parsed.schema_version != TRACE_SCHEMA_VERSION {
            return Err(CliError::io(
                path,
                format!("line {}: unsupported trace schema version {}", i + 1, parsed.schema_version),
            ));
        }
        out.push(parsed.record);
    }
    Ok(out)
}

/// Every `chain-*.jsonl` in `dir`, ordered by chain index.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<Vec<TraceRecord>>> {
    let mut files: Vec<(usize, PathBuf)> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let idx = name.strip_prefix("chain-")?.strip_suffix(".jsonl")?.parse().ok()?;
            Some((idx, p))
        })
        .collect();
    if files.is_empty() {
        return Err(CliError::io(dir, "no chain-*.jsonl trace files"));
    }
    files.sort();
    files.iter().map(|(_, p)| read_traces(p)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(BufReader::new(open(path)?)).map_err(|e| CliError::io(path, e))
}

/// Header plus rows of already-formatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, e);
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
