//! Readers for PhysioNet WFDB records as distributed with the MIT-BIH
//! Arrhythmia Database: `.hea` text headers, format-212 `.dat` signal files
//! and MIT-format `.atr` annotation streams.
//!
//! Only what MIT-BIH needs is supported: single-segment records whose
//! signals all live in one format-212 file.

mod annotation;
mod header;
mod signal;

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use annotation::{code_symbol, encode_annotations, parse_annotations, AnnotationEvent, BEAT_CODES};
pub use header::{parse_header, RecordHeader, SignalSpec};
pub use signal::{
    encode_212, parse_signal_212, to_physical, verify_checksum, ChannelCheck, DecodedSignal,
    SignalData,
};

/// The 48 records of the MIT-BIH Arrhythmia Database.
pub const MITBIH_RECORDS: [&str; 48] = [
    "100", "101", "102", "103", "104", "105", "106", "107", "108", "109", "111", "112", "113",
    "114", "115", "116", "117", "118", "119", "121", "122", "123", "124", "200", "201", "202",
    "203", "205", "207", "208", "209", "210", "212", "213", "214", "215", "217", "219", "220",
    "221", "222", "223", "228", "230", "231", "232", "233", "234",
];

#[derive(Debug, Error)]
pub enum WfdbError {
    #[error("header line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("header line {line}: unsupported signal format `{format}` (only 212 is read)")]
    UnsupportedFormat { line: usize, format: String },
    #[error("header declares {declared} signals but lists {found}")]
    SignalCount { declared: usize, found: usize },
    #[error("signal file truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("annotation stream ends at byte {offset} without a terminator")]
    MissingTerminator { offset: usize },
    #[error("annotation at byte {offset} has negative sample time {time}")]
    NegativeTime { offset: usize, time: i64 },
    #[error("annotation at byte {offset} moves time backwards ({time} < {previous})")]
    NonMonotonic { offset: usize, time: i64, previous: i64 },
    #[error("aux string at byte {offset} overruns the stream ({needed} bytes, {available} left)")]
    AuxOverrun { offset: usize, needed: usize, available: usize },
    #[error("signal {signal} has zero gain")]
    ZeroGain { signal: usize },
    #[error("record {record}: {message}")]
    Record { record: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T, E = WfdbError> = std::result::Result<T, E>;

/// A fully loaded record: header, decoded samples and annotations.
#[derive(Debug, Clone)]
pub struct Record {
    pub header: RecordHeader,
    pub signal: SignalData,
    pub checks: Vec<ChannelCheck>,
    pub annotations: Vec<AnnotationEvent>,
}

fn read(path: PathBuf) -> Result<Vec<u8>> {
    fs::read(&path).map_err(|source| WfdbError::Io { path, source })
}

impl Record {
    /// Loads `<dir>/<name>.hea`, its signal file and `<dir>/<name>.atr`.
    ///
    /// Annotations past the end of the signal are dropped with a warning.
    pub fn load(dir: &Path, name: &str) -> Result<Self> {
        let header = parse_header(&read(dir.join(format!("{name}.hea")))?)?;
        let file = header.signals[0].file_name.clone();
        if header.signals.iter().any(|s| s.file_name != file) {
            return Err(WfdbError::Record {
                record: name.to_owned(),
                message: "signals are spread over several files".into(),
            });
        }
        let decoded = parse_signal_212(&read(dir.join(&file))?, &header)?;
        for check in decoded.checks.iter().filter(|c| !c.passed()) {
            log::warn!(
                "record {name} channel {}: checksum {} != header {:?}",
                check.channel,
                check.computed,
                check.expected
            );
        }
        let mut annotations = parse_annotations(&read(dir.join(format!("{name}.atr")))?)?;
        let n = header.n_samples as u64;
        let before = annotations.len();
        annotations.retain(|a| a.sample_index < n);
        if annotations.len() != before {
            log::warn!(
                "record {name}: dropped {} annotations beyond sample {n}",
                before - annotations.len()
            );
        }
        Ok(Record {
            header,
            signal: decoded.signal,
            checks: decoded.checks,
            annotations,
        })
    }

    pub fn name(&self) -> &str {
        &self.header.record_name
    }

    /// `(sample_index, code)` for every beat annotation, in file order.
    pub fn beat_events(&self) -> Vec<(usize, u8)> {
        self.annotations
            .iter()
            .filter(|a| a.is_beat())
            .map(|a| (a.sample_index as usize, a.code))
            .collect()
    }
}

/// Record names (file stems of `*.hea`) present in `dir`, sorted.
pub fn list_records(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|source| WfdbError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "hea"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    names.sort();
    Ok(names)
}
