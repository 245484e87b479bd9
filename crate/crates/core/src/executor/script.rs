//! The scriptable calibration-program API.
//!
//! Protocols are methods on a live executor and return their [`Results`]
//! immediately, so calibration programs can branch, loop and recurse at
//! runtime. Unlike runcard execution, config updates apply only through an
//! explicit [`ScriptExecutor::apply_updates`] call; scripts own the update
//! policy.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::run::{
    resolve_targets, ActionStatus, ActionStatusFile, RunMeta, RunMode, RunRecord,
};
use super::{io_err, sub_seed, Action, ExecutorError, Runcard};
use crate::device::{load_truth, Device};
use crate::platform::{
    apply_update, canon, load_platform, platform_json_string, PlatformConfig, QubitId,
};
use crate::protocols::{self, Results, RoutineOutcome};
use crate::report;

struct ExecutedAction {
    action: Action,
    outcome: RoutineOutcome,
    status: ActionStatusFile,
}

pub struct ScriptExecutor {
    platform_name: String,
    platform_dir: PathBuf,
    config: PlatformConfig,
    device: Option<Device>,
    seed: u64,
    started_at: String,
    platform_start: PlatformConfig,
    op_counters: BTreeMap<String, usize>,
    executed: Vec<ExecutedAction>,
    saved: bool,
    saved_while_connected: bool,
}

impl ScriptExecutor {
    /// Open a platform for scripted calibration. Protocol calls fail until
    /// [`connect`](Self::connect) establishes the device session.
    pub fn open(platform_dir: &Path, seed: u64) -> Result<Self, ExecutorError> {
        let config = load_platform(platform_dir)?;
        Ok(ScriptExecutor {
            platform_name: config.name.clone(),
            platform_dir: platform_dir.to_path_buf(),
            platform_start: config.clone(),
            config,
            device: None,
            seed,
            started_at: report::utc_now_rfc3339(),
            op_counters: BTreeMap::new(),
            executed: Vec::new(),
            saved: false,
            saved_while_connected: false,
        })
    }

    pub fn connect(&mut self) -> Result<(), ExecutorError> {
        let mut truth = load_truth(&self.platform_dir)?;
        truth.noise.seed = self.seed;
        self.device = Some(Device::new(truth)?);
        Ok(())
    }

    pub fn disconnect(&mut self) {
        self.device = None;
    }

    pub fn is_connected(&self) -> bool {
        self.device.is_some()
    }

    /// The live config, including all applied updates.
    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Direct device access, for drift injection and test instrumentation.
    pub fn device_mut(&mut self) -> Option<&mut Device> {
        self.device.as_mut()
    }

    /// Run a registered protocol with an auto-generated action id
    /// `<operation>-<k>` and return its results.
    pub fn run_protocol(
        &mut self,
        operation: &str,
        targets: Option<&[String]>,
        params: Value,
    ) -> Result<Results, ExecutorError> {
        let counter = self.op_counters.entry(operation.to_string()).or_insert(0);
        let id = format!("{operation}-{counter}");
        *counter += 1;
        self.run_protocol_with_id(&id, operation, targets, params)
    }

    /// Run a protocol under an explicit action id. The id determines the
    /// device noise sub-stream, so repeated calls with the same id share
    /// common random numbers.
    pub fn run_protocol_with_id(
        &mut self,
        id: &str,
        operation: &str,
        targets: Option<&[String]>,
        params: Value,
    ) -> Result<Results, ExecutorError> {
        let device = self.device.as_mut().ok_or(ExecutorError::NotConnected)?;
        let routine = protocols::lookup(operation)?;
        let targets_owned = targets.map(|t| t.to_vec());
        let resolved = resolve_targets(
            &self.config,
            routine.target_kind(),
            targets_owned.as_ref(),
            None,
        );
        device.reseed(sub_seed(self.seed, id));
        let outcome = protocols::run_routine(routine, &self.config, &resolved, &params, device)?;
        let results = outcome.results.clone();
        let usable = results
            .per_target
            .values()
            .any(|t| t.quality != protocols::FitQuality::Failed);
        let status = ActionStatusFile {
            id: id.to_string(),
            operation: operation.to_string(),
            targets: resolved,
            status: if usable {
                ActionStatus::Completed
            } else {
                ActionStatus::Failed
            },
            error: None,
            acquired_at: outcome.data.timestamp.clone(),
        };
        self.executed.push(ExecutedAction {
            action: Action {
                id: id.to_string(),
                operation: operation.to_string(),
                targets: targets_owned,
                // Scripts apply updates explicitly.
                update: false,
                parameters: Some(params),
            },
            outcome,
            status,
        });
        Ok(results)
    }

    /// Apply the config updates a protocol derives from `results`, using
    /// the protocol named inside the results themselves.
    pub fn apply_updates(&mut self, results: &Results) -> Result<(), ExecutorError> {
        let routine = protocols::lookup(&results.protocol)?;
        let updates = routine.update(results, &self.config);
        self.config = apply_update(&self.config, &updates)?;
        Ok(())
    }

    /// Apply a single raw config update.
    pub fn set_config_value(
        &mut self,
        path: &str,
        value: Value,
    ) -> Result<(), ExecutorError> {
        self.config = apply_update(
            &self.config,
            &[crate::platform::ConfigUpdate::new(path, value)],
        )?;
        Ok(())
    }

    /// Shift a qubit's flux operating point on the live device.
    pub fn shift_flux(&mut self, qubit: &str, delta_v: f64) -> Result<(), ExecutorError> {
        let device = self.device.as_mut().ok_or(ExecutorError::NotConnected)?;
        device.set_flux_offset(&QubitId::new(qubit), delta_v)?;
        Ok(())
    }

    /// Persist every executed protocol in the standard run layout. May be
    /// called once; calling while still connected is allowed but recorded.
    pub fn save(&mut self, out_dir: &Path) -> Result<RunRecord, ExecutorError> {
        if self.saved {
            return Err(ExecutorError::AlreadySaved);
        }
        self.saved = true;
        self.saved_while_connected = self.is_connected();
        std::fs::create_dir_all(out_dir.join("data")).map_err(|e| io_err(out_dir, e))?;
        std::fs::write(
            out_dir.join("platform_start.json"),
            platform_json_string(&self.platform_start),
        )
        .map_err(|e| io_err(out_dir, e))?;
        std::fs::write(
            out_dir.join("platform_final.json"),
            platform_json_string(&self.config),
        )
        .map_err(|e| io_err(out_dir, e))?;

        let mut actions = Vec::new();
        for executed in &self.executed {
            let action_dir = out_dir.join("data").join(&executed.action.id);
            executed.outcome.data.save_into(&action_dir)?;
            executed.outcome.results.save_into(&action_dir)?;
            let mut status_doc =
                serde_json::to_value(&executed.status).expect("status serializes");
            canon::canonicalize(&mut status_doc);
            std::fs::write(
                action_dir.join("status.json"),
                canon::to_canonical_string(&status_doc),
            )
            .map_err(|e| io_err(&action_dir, e))?;
            actions.push(executed.action.clone());
        }
        let meta = RunMeta {
            platform: self.platform_name.clone(),
            seed: self.seed,
            mode: RunMode::Full,
            started_at: self.started_at.clone(),
            finished_at: report::utc_now_rfc3339(),
            runcard: Runcard {
                platform: self.platform_name.clone(),
                targets: None,
                actions,
            },
        };
        let mut meta_doc = serde_json::to_value(&meta).expect("meta serializes");
        if self.saved_while_connected {
            meta_doc["saved_while_connected"] = serde_json::json!(true);
        }
        canon::canonicalize(&mut meta_doc);
        std::fs::write(
            out_dir.join("meta.json"),
            canon::to_canonical_string(&meta_doc),
        )
        .map_err(|e| io_err(out_dir, e))?;

        let record = RunRecord::load(out_dir)?;
        let html = report::render_report(&record)?;
        std::fs::write(out_dir.join("report.html"), html).map_err(|e| io_err(out_dir, e))?;
        RunRecord::load(out_dir)
    }
}

macro_rules! protocol_method {
    ($(#[$doc:meta])* $fn_name:ident, $op:literal) => {
        $(#[$doc])*
        pub fn $fn_name(
            &mut self,
            targets: Option<&[String]>,
            params: Value,
        ) -> Result<Results, ExecutorError> {
            self.run_protocol($op, targets, params)
        }
    };
}

/// One method per registered protocol.
impl ScriptExecutor {
    protocol_method!(resonator_spectroscopy, "resonator_spectroscopy");
    protocol_method!(resonator_punchout, "resonator_punchout");
    protocol_method!(qubit_spectroscopy, "qubit_spectroscopy");
    protocol_method!(qubit_flux_dependence, "qubit_flux_dependence");
    protocol_method!(readout_frequency_optimization, "readout_frequency_optimization");
    protocol_method!(rabi, "rabi");
    protocol_method!(flipping, "flipping");
    protocol_method!(drag_tuning, "drag_tuning");
    protocol_method!(ramsey, "ramsey");
    protocol_method!(coherence_decay, "coherence_decay");
    protocol_method!(single_shot_classification, "single_shot_classification");
    protocol_method!(standard_rb, "standard_rb");
    protocol_method!(avoided_crossing, "avoided_crossing");
    protocol_method!(chevron, "chevron");
    protocol_method!(cz_virtual_phase, "cz_virtual_phase");
}
