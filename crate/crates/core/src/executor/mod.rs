//! Protocol execution: runcard-driven sequential runs with immediate config
//! updates, the scriptable calibration-program API, and run persistence.

mod optimize;
mod run;
mod runcard;
mod script;

pub use optimize::{optimize_pulse, OptimizePulseParams, PulseOptimization};
pub use run::{fit_run, run, ActionRecord, ActionStatus, RunMeta, RunMode, RunOptions, RunRecord};
pub use runcard::{load_runcard, parse_runcard, Action, Runcard};
pub use script::ScriptExecutor;

use std::path::PathBuf;

use thiserror::Error;

use crate::device::DeviceError;
use crate::platform::PlatformError;
use crate::protocols::ProtocolError;
use crate::report::ReportError;

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("failed to parse runcard {path}: {message}")]
    RuncardParse { path: PathBuf, message: String },
    #[error("unknown operation {name:?}; nearest registered names: {}", suggestions.join(", "))]
    UnknownOperation {
        name: String,
        suggestions: Vec<String>,
    },
    #[error("duplicate action id {0:?}")]
    DuplicateActionId(String),
    #[error("runcard has no actions")]
    EmptyRuncard,
    #[error("invalid parameters for action {action}: {message}")]
    InvalidActionParameters { action: String, message: String },
    #[error("output directory {0} already exists and is not empty")]
    OutputExists(PathBuf),
    #[error("missing acquisition data for action {0:?}")]
    MissingData(String),
    #[error("executor is not connected to a device")]
    NotConnected,
    #[error("executor output was already saved")]
    AlreadySaved,
    #[error("pulse optimization failed: {0}")]
    Optimization(String),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> ExecutorError {
    ExecutorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Stable per-action seed: FNV-1a over the action id folded into the global
/// seed with a splitmix64 finalizer. Inserting an action leaves other
/// actions' noise streams untouched.
pub fn sub_seed(global_seed: u64, action_id: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = FNV_OFFSET;
    for byte in action_id.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    let mut z = global_seed ^ hash;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
