//! On-disk formats.
//!
//! A recording is a headerless payload of little-endian `f32` samples, channel
//! after channel, plus a JSON sidecar holding shape, rate, line frequency,
//! unit and events. Stage logs are JSON-Lines, one `StageReport` per line.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use neuroclean_core::model::{validate, Event, Recording, StageReport};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const UNIT: &str = "uV";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("payload holds {got} bytes but the sidecar describes {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("non-finite sample at channel {channel}, sample {sample}")]
    NonFinite { channel: usize, sample: usize },
    #[error("unsupported format_version {0} (expected {FORMAT_VERSION})")]
    BadVersion(u32),
    #[error("unsupported unit {0:?} (expected \"{UNIT}\")")]
    BadUnit(String),
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("row {row}, column {column}: {text:?} is not a number")]
    NonNumericCell { row: usize, column: usize, text: String },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid recording: {0}")]
    Invalid(String),
}

pub type IoResult<T> = Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarMeta {
    pub format_version: u32,
    pub n_channels: usize,
    pub n_samples: usize,
    pub sampling_rate_hz: f64,
    #[serde(default)]
    pub line_freq_hz: Option<f64>,
    pub unit: String,
    #[serde(default)]
    pub events: Vec<Event>,
}

impl SidecarMeta {
    pub fn for_recording(recording: &Recording) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n_channels: recording.n_channels(),
            n_samples: recording.n_samples(),
            sampling_rate_hz: recording.sampling_rate_hz,
            line_freq_hz: recording.line_freq_hz,
            unit: UNIT.to_string(),
            events: recording.events.clone(),
        }
    }
}

/// Sidecar path paired with a payload path (`x.ncr` → `x.json`).
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> IoResult<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> IoResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Loads a payload and its sidecar. All-zero rows come back as rejected
/// channels, since the mask itself is not stored.
pub fn read_recording(data_path: &Path, sidecar: &Path) -> IoResult<Recording> {
    let meta: SidecarMeta = read_json(sidecar)?;
    if meta.format_version != FORMAT_VERSION {
        return Err(IoError::BadVersion(meta.format_version));
    }
    if meta.unit != UNIT {
        return Err(IoError::BadUnit(meta.unit));
    }
    let bytes = fs::read(data_path).map_err(io_err(data_path))?;
    let expected = meta.n_channels * meta.n_samples * 4;
    if bytes.len() != expected {
        return Err(IoError::SizeMismatch {
            expected,
            got: bytes.len(),
        });
    }
    let mut data = Vec::with_capacity(expected / 4);
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(IoError::NonFinite {
                channel: i / meta.n_samples.max(1),
                sample: i % meta.n_samples.max(1),
            });
        }
        data.push(f64::from(v));
    }
    let mut rec = Recording::new(meta.n_channels, meta.n_samples, data, meta.sampling_rate_hz)
        .map_err(|e| IoError::Invalid(e.to_string()))?
        .with_events(meta.events)
        .with_line_freq(meta.line_freq_hz);
    rec.infer_mask_from_zero_rows();
    let problems = validate(&rec);
    if !problems.is_empty() {
        let text: Vec<String> = problems.iter().map(ToString::to_string).collect();
        return Err(IoError::Invalid(text.join("; ")));
    }
    Ok(rec)
}

/// Writes the payload (samples narrowed to `f32`) and the sidecar.
pub fn write_recording(recording: &Recording, data_path: &Path, sidecar: &Path) -> IoResult<()> {
    let file = File::create(data_path).map_err(io_err(data_path))?;
    let mut out = BufWriter::new(file);
    for &v in recording.data() {
        out.write_all(&(v as f32).to_le_bytes()).map_err(io_err(data_path))?;
    }
    out.flush().map_err(io_err(data_path))?;
    write_json(&SidecarMeta::for_recording(recording), sidecar)
}

/// Reads a headerless numeric CSV with one column per channel.
pub fn read_csv(path: &Path, sampling_rate_hz: f64) -> IoResult<Recording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        if row == 0 {
            columns = vec![Vec::new(); record.len()];
        } else if record.len() != columns.len() {
            return Err(IoError::RaggedRows {
                row,
                expected: columns.len(),
                got: record.len(),
            });
        }
        for (column, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| IoError::NonNumericCell {
                row,
                column,
                text: cell.to_string(),
            })?;
            columns[column].push(v);
        }
    }
    Recording::from_rows(&columns, sampling_rate_hz).map_err(|e| IoError::Invalid(e.to_string()))
}

/// Appends one report as a single JSON line.
pub fn append_stage_log(report: &StageReport, log_path: &Path) -> IoResult<()> {
    let line = serde_json::to_string(report).map_err(|source| IoError::Json {
        path: log_path.to_path_buf(),
        source,
    })?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(log_path)
        .map_err(io_err(log_path))?;
    writeln!(file, "{line}").map_err(io_err(log_path))
}

pub fn read_stage_log(log_path: &Path) -> IoResult<Vec<StageReport>> {
    let text = fs::read_to_string(log_path).map_err(io_err(log_path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| IoError::Json {
                path: log_path.to_path_buf(),
                source,
            })
        })
        .collect()
}
