//! Append-only JSON-lines event log.
//!
//! One record per line, UTF-8, newline-terminated. The first line of a run's
//! `events.jsonl` is a [`LogHeader`]. Fields this version does not know about
//! are kept in [`EventLogRecord::extra`] and written back unchanged.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::TelemetryError;

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub run_config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogRecord {
    /// Simulated cluster time in ms since the start of the run.
    pub ts: f64,
    pub episode: u64,
    pub step: u64,
    pub fps: u32,
    pub partitions: u32,
    pub frames_per_partition: u32,
    pub cores: u32,
    pub memory_mb: u32,
    pub instances: u32,
    /// Batch time the reward was computed from, including amortized reconfiguration delay.
    pub processing_time_ms: f64,
    pub reward: f64,
    pub epsilon: f64,
    pub loss: Option<f64>,
    pub cpu_util_pct: f64,
    pub mem_util_pct: f64,
    pub contention: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_role: Option<String>,
    pub action_index: u32,
    pub applied: bool,
    #[serde(default)]
    pub reconfig_delay_ms: f64,
    #[serde(default)]
    pub throughput_tps: f64,
    /// Observation the action was chosen from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub next_state: Vec<f64>,
    #[serde(default)]
    pub done: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Serialize to a single line without the trailing newline.
pub fn to_line<T: Serialize>(value: &T) -> Result<String, TelemetryError> {
    serde_json::to_string(value).map_err(|e| TelemetryError::Encode(e.to_string()))
}

/// Buffered writer for a whole run. Truncates any existing file.
pub struct EventLogWriter {
    inner: BufWriter<File>,
    written: usize,
}

impl EventLogWriter {
    pub fn create(path: &Path, header: Option<&LogHeader>) -> Result<Self, TelemetryError> {
        let file = File::create(path).map_err(|e| TelemetryError::io(path, e))?;
        let mut w = Self {
            inner: BufWriter::new(file),
            written: 0,
        };
        if let Some(h) = header {
            w.write_line(&to_line(h)?)?;
        }
        Ok(w)
    }

    pub fn append(&mut self, record: &EventLogRecord) -> Result<(), TelemetryError> {
        self.write_line(&to_line(record)?)?;
        self.written += 1;
        Ok(())
    }

    pub fn records_written(&self) -> usize {
        self.written
    }

    pub fn flush(&mut self) -> Result<(), TelemetryError> {
        self.inner.flush().map_err(TelemetryError::Io)
    }

    fn write_line(&mut self, line: &str) -> Result<(), TelemetryError> {
        self.inner
            .write_all(line.as_bytes())
            .and_then(|_| self.inner.write_all(b"\n"))
            .map_err(TelemetryError::Io)
    }
}

impl Drop for EventLogWriter {
    fn drop(&mut self) {
        let _ = self.inner.flush();
    }
}

/// Append one record, creating the file if needed.
pub fn append_log(path: &Path, record: &EventLogRecord) -> Result<(), TelemetryError> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| TelemetryError::io(path, e))?;
    let mut line = to_line(record)?;
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(TelemetryError::Io)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub header: Option<LogHeader>,
    pub records: Vec<EventLogRecord>,
    /// Partial trailing lines that were skipped.
    pub warnings: usize,
}

pub fn read_log(path: &Path) -> Result<EventLog, TelemetryError> {
    let file = File::open(path).map_err(|e| TelemetryError::io(path, e))?;
    parse_log(BufReader::new(file))
}

pub fn parse_log<R: Read>(mut reader: BufReader<R>) -> Result<EventLog, TelemetryError> {
    let mut log = EventLog::default();
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf).map_err(TelemetryError::Io)?;
    let ends_with_newline = buf.is_empty() || buf.ends_with(b"\n");
    let mut segments: Vec<&[u8]> = buf.split(|&b| b == b'\n').collect();
    if ends_with_newline {
        segments.pop();
    }
    let raw_lines: Vec<(usize, Vec<u8>)> = segments
        .into_iter()
        .enumerate()
        .map(|(i, s)| (i + 1, s.to_vec()))
        .collect();
    let total = raw_lines.len();
    for (pos, (line_no, bytes)) in raw_lines.into_iter().enumerate() {
        let is_last = pos + 1 == total;
        let text = match String::from_utf8(bytes) {
            Ok(t) => t,
            Err(e) => {
                return Err(TelemetryError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) if is_last && !ends_with_newline => {
                log.warnings += 1;
                log::warn!("skipping partial trailing line {line_no}");
                continue;
            }
            Err(e) => {
                return Err(TelemetryError::Parse {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        if log.records.is_empty() && log.header.is_none() && is_header(&value) {
            let header = serde_json::from_value(value).map_err(|e| TelemetryError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            log.header = Some(header);
            continue;
        }
        let record = serde_json::from_value(value).map_err(|e| TelemetryError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        log.records.push(record);
    }
    Ok(log)
}

fn is_header(v: &Value) -> bool {
    v.get("schema_version").is_some() && v.get("step").is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn sample(step: u64) -> EventLogRecord {
        EventLogRecord {
            ts: step as f64 * 412.5,
            episode: 1,
            step,
            fps: 30,
            partitions: 5,
            frames_per_partition: 30,
            cores: 2,
            memory_mb: 700,
            instances: 6,
            processing_time_ms: 412.5 + 1.0 / 3.0,
            reward: 1.0 / 412_833.333,
            epsilon: 0.995,
            loss: if step == 0 { None } else { Some(0.1) },
            cpu_util_pct: 55.5,
            mem_util_pct: 21.0,
            contention: 1.0,
            agent_role: None,
            action_index: 13,
            applied: true,
            reconfig_delay_ms: 0.0,
            throughput_tps: 363.0,
            state: vec![0.5, 2.0 / 3.0, 0.7, 0.75, 0.2, 0.5, 0.1, 0.0, 0.4],
            next_state: vec![0.5, 2.0 / 3.0, 0.7, 0.75, 0.21, 0.5, 0.1, 0.0, 0.4],
            done: false,
            extra: Map::new(),
        }
    }

    #[test]
    fn write_then_read_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let header = LogHeader {
            schema_version: LOG_SCHEMA_VERSION,
            run_config_hash: "abc".into(),
        };
        let records: Vec<_> = (0..3).map(sample).collect();
        {
            let mut w = EventLogWriter::create(&path, Some(&header)).unwrap();
            for r in &records {
                w.append(r).unwrap();
            }
        }
        let log = read_log(&path).unwrap();
        assert_eq!(log.header, Some(header));
        assert_eq!(log.records, records);
        assert_eq!(log.warnings, 0);
    }

    #[test]
    fn append_log_creates_and_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        append_log(&path, &sample(0)).unwrap();
        append_log(&path, &sample(1)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with('\n'));
        assert_eq!(read_log(&path).unwrap().records.len(), 2);
    }

    #[test]
    fn empty_file_is_empty_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        std::fs::write(&path, "").unwrap();
        assert_eq!(read_log(&path).unwrap(), EventLog::default());
    }

    #[test]
    fn truncated_tail_is_skipped_with_warning() {
        let mut text = String::new();
        for r in [sample(0), sample(1)] {
            text.push_str(&to_line(&r).unwrap());
            text.push('\n');
        }
        let third = to_line(&sample(2)).unwrap();
        text.push_str(&third[..third.len() / 2]);
        let log = parse_log(BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.warnings, 1);
    }

    #[test]
    fn malformed_middle_line_reports_line_number() {
        let text = format!(
            "{}\nnot json\n{}\n",
            to_line(&sample(0)).unwrap(),
            to_line(&sample(1)).unwrap()
        );
        match parse_log(BufReader::new(text.as_bytes())) {
            Err(TelemetryError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_survive() {
        let mut line: Value = serde_json::to_value(sample(4)).unwrap();
        line["future_field"] = serde_json::json!({"nested": [1, 2]});
        let text = format!("{}\n", serde_json::to_string(&line).unwrap());
        let log = parse_log(BufReader::new(text.as_bytes())).unwrap();
        let rec = &log.records[0];
        assert_eq!(rec.extra["future_field"], serde_json::json!({"nested": [1, 2]}));
        let again: Value = serde_json::from_str(&to_line(rec).unwrap()).unwrap();
        assert_eq!(again, line);
    }

    proptest! {
        #[test]
        fn floats_roundtrip_exactly(t in 1e-3f64..1e7, r in 1e-12f64..1.0, u in 0.0f64..100.0) {
            let mut rec = sample(9);
            rec.processing_time_ms = t;
            rec.reward = r;
            rec.cpu_util_pct = u;
            let text = format!("{}\n", to_line(&rec).unwrap());
            let log = parse_log(BufReader::new(text.as_bytes())).unwrap();
            prop_assert_eq!(&log.records[0], &rec);
        }
    }
}
