//! JSON-lines metrics log for monitoring runs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReportError;

/// One monitored scalar: a qubit metric at a point in time, with a pointer
/// back to the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// RFC-3339 UTC timestamp.
    pub timestamp: String,
    pub qubit: String,
    pub metric: String,
    pub value: f64,
    pub run_dir: String,
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Append records as JSON lines, one object per line, in a single atomic
/// write. Timestamps must be monotone within the file, so the batch is
/// checked against its own ordering and the existing tail.
pub fn append_metrics(path: &Path, records: &[MetricsRecord]) -> Result<(), ReportError> {
    if records.is_empty() {
        return Ok(());
    }
    for pair in records.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(ReportError::NonMonotoneMetrics(pair[1].timestamp.clone()));
        }
    }
    if path.exists() {
        let existing = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        if let Some(last) = existing.lines().rev().find(|l| !l.trim().is_empty()) {
            let tail: MetricsRecord =
                serde_json::from_str(last).map_err(|e| ReportError::MalformedMetrics {
                    line: existing.lines().count(),
                    message: e.to_string(),
                })?;
            if records[0].timestamp < tail.timestamp {
                return Err(ReportError::NonMonotoneMetrics(records[0].timestamp.clone()));
            }
        }
    }
    let mut payload = String::new();
    for record in records {
        payload.push_str(&serde_json::to_string(record).expect("record serializes"));
        payload.push('\n');
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    file.write_all(payload.as_bytes())
        .map_err(|e| io_err(path, e))
}

/// Parse every line of a metrics log.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record =
            serde_json::from_str(line).map_err(|e| ReportError::MalformedMetrics {
                line: i + 1,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ts: &str, metric: &str, value: f64) -> MetricsRecord {
        MetricsRecord {
            timestamp: ts.to_string(),
            qubit: "q0".into(),
            metric: metric.into(),
            value,
            run_dir: "runs/x".into(),
        }
    }

    #[test]
    fn appends_parseable_lines_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let batch1 = vec![
            record("2026-01-01T00:00:00Z", "t1_ns", 1.0e4),
            record("2026-01-01T00:00:01Z", "t2_ramsey_ns", 5.0e3),
            record("2026-01-01T00:00:02Z", "readout_fidelity", 0.91),
        ];
        append_metrics(&path, &batch1).unwrap();
        assert_eq!(read_metrics(&path).unwrap().len(), 3);
        let batch2 = vec![
            record("2026-01-01T00:30:00Z", "t1_ns", 1.1e4),
            record("2026-01-01T00:30:01Z", "t2_ramsey_ns", 4.9e3),
            record("2026-01-01T00:30:02Z", "readout_fidelity", 0.92),
        ];
        append_metrics(&path, &batch2).unwrap();
        let all = read_metrics(&path).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], batch1[0]);
        assert_eq!(all[5], batch2[2]);
    }

    #[test]
    fn rejects_regressing_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        append_metrics(&path, &[record("2026-01-02T00:00:00Z", "t1_ns", 1.0)]).unwrap();
        let err = append_metrics(&path, &[record("2026-01-01T00:00:00Z", "t1_ns", 2.0)]);
        assert!(matches!(err, Err(ReportError::NonMonotoneMetrics(_))));
    }

    #[test]
    fn every_prefix_of_the_log_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let records: Vec<MetricsRecord> = (0..5)
            .map(|i| record(&format!("2026-01-01T00:0{i}:00Z"), "t1_ns", i as f64))
            .collect();
        append_metrics(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        for cut in 1..=lines.len() {
            for line in &lines[..cut] {
                serde_json::from_str::<MetricsRecord>(line).unwrap();
            }
        }
    }
}
