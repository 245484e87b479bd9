//! Reporting: per-run HTML documents with inline SVG, run comparison,
//! the monitoring metrics log and run archiving.

mod archive;
mod html;
mod metrics;
pub mod svg;

pub use archive::{export_archive, extract_archive};
pub use html::{check_well_formed, render_compare, render_report};
pub use metrics::{append_metrics, read_metrics, MetricsRecord};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run has no actions")]
    EmptyRun,
    #[error("runs share no (operation, target) pairs")]
    NothingShared,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed metrics line {line}: {message}")]
    MalformedMetrics { line: usize, message: String },
    #[error("metrics timestamps must be monotone: {0} precedes the existing log tail")]
    NonMonotoneMetrics(String),
    #[error("archive error: {0}")]
    Archive(String),
}

/// Current UTC time, RFC-3339 with second precision.
pub fn utc_now_rfc3339() -> String {
    chrono::Utc::now()
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// One table in a report section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Renderable content a protocol contributes for one action.
#[derive(Debug, Clone)]
pub struct SectionContent {
    pub title: String,
    /// Inline SVG documents.
    pub figures: Vec<String>,
    pub tables: Vec<Table>,
    /// Escape hatch: protocols may supply raw HTML for full control.
    pub raw_html: Option<String>,
}
