//! Runcard execution and run-directory persistence.
//!
//! Output layout:
//!
//! ```text
//! <out>/meta.json
//! <out>/platform_start.json
//! <out>/platform_final.json        (full runs; fit --update)
//! <out>/data/<action-id>/{parameters.json,data.json,results.json,status.json}
//! <out>/report.html
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, sub_seed, ExecutorError, Runcard};
use crate::device::{load_truth, Device};
use crate::platform::{
    apply_update, canon, load_platform, platform_from_json, platform_json_string, PlatformConfig,
};
use crate::protocols::{self, Data, FitQuality, Results, TargetKind};
use crate::report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Full,
    AcquireOnly,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub mode: RunMode,
    /// Allow writing into an existing non-empty directory.
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionStatus {
    Acquired,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionStatusFile {
    pub id: String,
    pub operation: String,
    pub targets: Vec<String>,
    pub status: ActionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub acquired_at: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub platform: String,
    pub seed: u64,
    pub mode: RunMode,
    pub started_at: String,
    pub finished_at: String,
    pub runcard: Runcard,
}

/// One action of a loaded run directory.
#[derive(Debug, Clone)]
pub struct ActionRecord {
    pub id: String,
    pub operation: String,
    pub targets: Vec<String>,
    pub status: ActionStatus,
    pub error: Option<String>,
    pub data: Option<Data>,
    pub results: Option<Results>,
}

/// A run directory loaded back into memory.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub meta: RunMeta,
    pub platform_start: PlatformConfig,
    pub platform_final: Option<PlatformConfig>,
    pub actions: Vec<ActionRecord>,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<RunRecord, ExecutorError> {
        let meta_text =
            std::fs::read_to_string(dir.join("meta.json")).map_err(|e| io_err(dir, e))?;
        let meta: RunMeta =
            serde_json::from_str(&meta_text).map_err(|e| ExecutorError::RuncardParse {
                path: dir.join("meta.json"),
                message: e.to_string(),
            })?;
        let platform_start = load_config_file(&dir.join("platform_start.json"))?;
        let platform_final = {
            let path = dir.join("platform_final.json");
            if path.is_file() {
                Some(load_config_file(&path)?)
            } else {
                None
            }
        };
        let mut actions = Vec::new();
        for action in &meta.runcard.actions {
            let action_dir = dir.join("data").join(&action.id);
            let status_path = action_dir.join("status.json");
            let status: ActionStatusFile = match std::fs::read_to_string(&status_path) {
                Ok(text) => serde_json::from_str(&text).map_err(|e| {
                    ExecutorError::RuncardParse {
                        path: status_path.clone(),
                        message: e.to_string(),
                    }
                })?,
                Err(_) => continue,
            };
            let data = Data::load_from(&action_dir, &status.acquired_at).ok();
            let results = Results::load_from(&action_dir).ok();
            actions.push(ActionRecord {
                id: status.id.clone(),
                operation: status.operation.clone(),
                targets: status.targets.clone(),
                status: status.status,
                error: status.error.clone(),
                data,
                results,
            });
        }
        Ok(RunRecord {
            dir: dir.to_path_buf(),
            meta,
            platform_start,
            platform_final,
            actions,
        })
    }
}

fn load_config_file(path: &Path) -> Result<PlatformConfig, ExecutorError> {
    // Platform snapshots share the platform.json schema under other names.
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(platform_from_json(&text, path)?)
}

/// Targets for one action: per-action list, then runcard default, then every
/// platform qubit or pair.
pub(crate) fn resolve_targets(
    config: &PlatformConfig,
    kind: TargetKind,
    action_targets: Option<&Vec<String>>,
    runcard_targets: Option<&Vec<String>>,
) -> Vec<String> {
    if let Some(t) = action_targets {
        return t.clone();
    }
    if let Some(t) = runcard_targets {
        return t.clone();
    }
    match kind {
        TargetKind::Qubit => config.qubits.keys().map(|q| q.to_string()).collect(),
        TargetKind::Pair => config.pairs.keys().cloned().collect(),
    }
}

fn ensure_output_dir(out_dir: &Path, force: bool) -> Result<(), ExecutorError> {
    if out_dir.exists() {
        let non_empty = std::fs::read_dir(out_dir)
            .map(|mut it| it.next().is_some())
            .unwrap_or(false);
        if non_empty && !force {
            return Err(ExecutorError::OutputExists(out_dir.to_path_buf()));
        }
    }
    std::fs::create_dir_all(out_dir.join("data")).map_err(|e| io_err(out_dir, e))
}

fn write_config_snapshot(
    config: &PlatformConfig,
    path: &Path,
) -> Result<(), ExecutorError> {
    std::fs::write(path, platform_json_string(config)).map_err(|e| io_err(path, e))
}

fn write_status(action_dir: &Path, status: &ActionStatusFile) -> Result<(), ExecutorError> {
    std::fs::create_dir_all(action_dir).map_err(|e| io_err(action_dir, e))?;
    let mut doc = serde_json::to_value(status).expect("status serializes");
    canon::canonicalize(&mut doc);
    std::fs::write(
        action_dir.join("status.json"),
        canon::to_canonical_string(&doc),
    )
    .map_err(|e| io_err(action_dir, e))
}

fn write_meta(dir: &Path, meta: &RunMeta) -> Result<(), ExecutorError> {
    let mut doc = serde_json::to_value(meta).expect("meta serializes");
    canon::canonicalize(&mut doc);
    std::fs::write(dir.join("meta.json"), canon::to_canonical_string(&doc))
        .map_err(|e| io_err(dir, e))
}

/// Whether a fit left any target updatable (failed targets never update).
fn any_usable_target(results: &Results) -> bool {
    results
        .per_target
        .values()
        .any(|t| t.quality != FitQuality::Failed)
}

/// Execute a runcard: actions run in order; with `update: true` each
/// action's config updates apply before the next action acquires. A failed
/// fit marks its action failed and execution continues.
///
/// In acquire-only mode fits still run transiently to thread config updates
/// through the sequence (keeping acquisition inputs identical to a full
/// run), but results are not persisted.
pub fn run(
    platform_dir: &Path,
    runcard: &Runcard,
    out_dir: &Path,
    options: &RunOptions,
) -> Result<RunRecord, ExecutorError> {
    runcard.validate()?;
    ensure_output_dir(out_dir, options.force)?;
    let started_at = report::utc_now_rfc3339();

    let mut config = load_platform(platform_dir)?;
    let truth = {
        let mut t = load_truth(platform_dir)?;
        t.noise.seed = options.seed;
        t
    };
    let mut device = Device::new(truth)?;

    write_config_snapshot(&config, &out_dir.join("platform_start.json"))?;

    for action in &runcard.actions {
        let action_dir = out_dir.join("data").join(&action.id);
        let routine = protocols::lookup(&action.operation)?;
        let targets = resolve_targets(
            &config,
            routine.target_kind(),
            action.targets.as_ref(),
            runcard.targets.as_ref(),
        );
        let params = action
            .parameters
            .clone()
            .unwrap_or_else(|| serde_json::json!({}));
        device.reseed(sub_seed(options.seed, &action.id));

        let mut status = ActionStatusFile {
            id: action.id.clone(),
            operation: action.operation.clone(),
            targets: targets.clone(),
            status: ActionStatus::Acquired,
            error: None,
            acquired_at: report::utc_now_rfc3339(),
        };

        let data = match routine.acquire(&config, &targets, &params, &mut device) {
            Ok(mut data) => {
                data.canonicalize();
                data
            }
            Err(protocols::ProtocolError::Io(e)) => {
                // I/O failures abort the run; partial outputs stay on disk.
                status.status = ActionStatus::Failed;
                status.error = Some(e.to_string());
                write_status(&action_dir, &status)?;
                return Err(protocols::ProtocolError::Io(e).into());
            }
            Err(e) => {
                status.status = ActionStatus::Failed;
                status.error = Some(e.to_string());
                write_status(&action_dir, &status)?;
                continue;
            }
        };
        status.acquired_at = data.timestamp.clone();
        data.save_into(&action_dir)?;

        let results = routine.fit(&data);
        let usable = any_usable_target(&results);
        if options.mode == RunMode::Full {
            results.save_into(&action_dir)?;
            status.status = if usable {
                ActionStatus::Completed
            } else {
                ActionStatus::Failed
            };
            if !usable {
                status.error = results
                    .per_target
                    .values()
                    .find_map(|t| t.message.clone())
                    .or(Some("all targets failed to fit".into()));
            }
        }
        if action.update && usable {
            let updates = routine.update(&results, &config);
            match apply_update(&config, &updates) {
                Ok(updated) => config = updated,
                Err(e) => {
                    status.status = ActionStatus::Failed;
                    status.error = Some(format!("config update rejected: {e}"));
                }
            }
        }
        write_status(&action_dir, &status)?;
    }

    if options.mode == RunMode::Full {
        write_config_snapshot(&config, &out_dir.join("platform_final.json"))?;
    }
    let meta = RunMeta {
        platform: runcard.platform.clone(),
        seed: options.seed,
        mode: options.mode,
        started_at,
        finished_at: report::utc_now_rfc3339(),
        runcard: runcard.clone(),
    };
    write_meta(out_dir, &meta)?;

    let record = RunRecord::load(out_dir)?;
    let html = report::render_report(&record)?;
    std::fs::write(out_dir.join("report.html"), html).map_err(|e| io_err(out_dir, e))?;
    RunRecord::load(out_dir)
}

/// Fit every action of an acquired run directory, writing results.json and,
/// with `update`, platform_final.json with updates accumulated in action
/// order. Idempotent: refitting produces identical outputs.
pub fn fit_run(out_dir: &Path, update: bool) -> Result<RunRecord, ExecutorError> {
    let record = RunRecord::load(out_dir)?;
    let mut config = record.platform_start.clone();

    for action in &record.meta.runcard.actions {
        let action_dir = out_dir.join("data").join(&action.id);
        let routine = protocols::lookup(&action.operation)?;
        if !action_dir.join("data.json").is_file() {
            let mut status = read_status(&action_dir).unwrap_or_else(|| ActionStatusFile {
                id: action.id.clone(),
                operation: action.operation.clone(),
                targets: Vec::new(),
                status: ActionStatus::Failed,
                error: None,
                acquired_at: report::utc_now_rfc3339(),
            });
            status.status = ActionStatus::Failed;
            status.error = Some("missing acquisition data".into());
            write_status(&action_dir, &status)?;
            continue;
        }
        let mut status = read_status(&action_dir).ok_or_else(|| {
            ExecutorError::MissingData(action.id.clone())
        })?;
        let data = match Data::load_from(&action_dir, &status.acquired_at) {
            Ok(data) => data,
            Err(e) => {
                status.status = ActionStatus::Failed;
                status.error = Some(format!("corrupted data: {e}"));
                write_status(&action_dir, &status)?;
                continue;
            }
        };
        let results = routine.fit(&data);
        results.save_into(&action_dir)?;
        let usable = any_usable_target(&results);
        status.status = if usable {
            ActionStatus::Completed
        } else {
            ActionStatus::Failed
        };
        status.error = if usable {
            None
        } else {
            results
                .per_target
                .values()
                .find_map(|t| t.message.clone())
                .or(Some("all targets failed to fit".into()))
        };
        write_status(&action_dir, &status)?;
        if update && action.update && usable {
            let updates = routine.update(&results, &config);
            if let Ok(updated) = apply_update(&config, &updates) {
                config = updated;
            }
        }
    }

    if update {
        write_config_snapshot(&config, &out_dir.join("platform_final.json"))?;
    }
    let record = RunRecord::load(out_dir)?;
    let html = report::render_report(&record)?;
    std::fs::write(out_dir.join("report.html"), html).map_err(|e| io_err(out_dir, e))?;
    RunRecord::load(out_dir)
}

fn read_status(action_dir: &Path) -> Option<ActionStatusFile> {
    let text = std::fs::read_to_string(action_dir.join("status.json")).ok()?;
    serde_json::from_str(&text).ok()
}
