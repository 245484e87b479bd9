//! The routine catalog.
//!
//! Each protocol packages four stages: acquisition (build [`ExperimentSpec`]s
//! from parameters and the platform config, run them on the device), a fit
//! that is a pure function of the acquired [`Data`], config updates derived
//! from the fitted [`Results`], and report sections.
//!
//! A failed fit sets `FitQuality::Failed` for the affected target and never
//! produces updates; `Poor` still updates unless a protocol documents
//! otherwise. Poor is flagged when a key parameter's standard error exceeds
//! 20% of its value or the fitted feature sits at the sweep edge.

mod classification;
mod coherence;
mod rabi;
mod rb;
mod spectroscopy;
mod two_qubit;

pub use rb::sample_rb_sequences;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::device::{ArraySet, Device, DeviceError};
use crate::numerics::FitResult;
use crate::platform::{canon, ClassifierParams, ConfigUpdate, PlatformConfig, QubitId};
use crate::report::{SectionContent, Table};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unknown protocol {0:?}")]
    UnknownProtocol(String),
    #[error("target {target:?} not present in the platform")]
    UnknownTarget { target: String },
    #[error("bad parameters for {protocol}: {message}")]
    BadParameters { protocol: String, message: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("failed to persist data: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed stored data: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitQuality {
    Good,
    Poor,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Qubit,
    Pair,
}

/// Raw output of one acquisition across targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Data {
    pub protocol: String,
    /// Fully resolved parameters (defaults applied).
    pub parameters: Value,
    /// RFC-3339 acquisition timestamp; persisted in status.json so data.json
    /// stays byte-reproducible for a fixed seed.
    pub timestamp: String,
    pub per_target: BTreeMap<String, ArraySet>,
}

impl Data {
    pub fn new(protocol: &str, parameters: Value) -> Self {
        Data {
            protocol: protocol.to_string(),
            parameters,
            timestamp: crate::report::utc_now_rfc3339(),
            per_target: BTreeMap::new(),
        }
    }

    /// Round every float payload to the canonical on-disk resolution so a
    /// save/load round trip reproduces this value exactly (the acquire/fit
    /// split depends on it).
    pub fn canonicalize(&mut self) {
        self.per_target.values_mut().for_each(ArraySet::canonicalize);
        canon::canonicalize(&mut self.parameters);
    }

    /// Write `data.json` and `parameters.json` into an action directory.
    pub fn save_into(&self, dir: &Path) -> Result<(), ProtocolError> {
        std::fs::create_dir_all(dir)?;
        let mut doc = serde_json::json!({
            "protocol": self.protocol,
            "targets": self.per_target,
        });
        canon::canonicalize(&mut doc);
        std::fs::write(dir.join("data.json"), canon::to_canonical_string(&doc))?;
        let mut params = self.parameters.clone();
        canon::canonicalize(&mut params);
        std::fs::write(
            dir.join("parameters.json"),
            canon::to_canonical_string(&params),
        )?;
        Ok(())
    }

    /// Reassemble from an action directory written by [`Data::save_into`].
    pub fn load_from(dir: &Path, timestamp: &str) -> Result<Self, ProtocolError> {
        let data_text = std::fs::read_to_string(dir.join("data.json"))?;
        let doc: Value =
            serde_json::from_str(&data_text).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        let protocol = doc
            .get("protocol")
            .and_then(Value::as_str)
            .ok_or_else(|| ProtocolError::Malformed("missing protocol field".into()))?
            .to_string();
        let per_target: BTreeMap<String, ArraySet> = serde_json::from_value(
            doc.get("targets")
                .cloned()
                .ok_or_else(|| ProtocolError::Malformed("missing targets field".into()))?,
        )
        .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        let params_text = std::fs::read_to_string(dir.join("parameters.json"))?;
        let parameters: Value = serde_json::from_str(&params_text)
            .map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        Ok(Data {
            protocol,
            parameters,
            timestamp: timestamp.to_string(),
            per_target,
        })
    }
}

/// Shallow fit diagnostics carried into results.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiag {
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl From<&FitResult> for FitDiag {
    fn from(fit: &FitResult) -> Self {
        FitDiag {
            params: fit.params.clone(),
            stderr: fit.stderr.clone(),
            cost: fit.cost,
            converged: fit.converged,
            iterations: fit.iterations,
        }
    }
}

/// Per-target fitted outcome: a shallow map of named scalars plus quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub values: BTreeMap<String, f64>,
    pub quality: FitQuality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitDiag>,
}

impl TargetResult {
    pub fn failed(message: impl Into<String>) -> Self {
        TargetResult {
            values: BTreeMap::new(),
            quality: FitQuality::Failed,
            message: Some(message.into()),
            fit: None,
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub protocol: String,
    pub per_target: BTreeMap<String, TargetResult>,
}

impl Results {
    pub fn new(protocol: &str) -> Self {
        Results {
            protocol: protocol.to_string(),
            per_target: BTreeMap::new(),
        }
    }

    pub fn save_into(&self, dir: &Path) -> Result<(), ProtocolError> {
        std::fs::create_dir_all(dir)?;
        let mut doc = serde_json::to_value(self).expect("results serialize");
        canon::canonicalize(&mut doc);
        std::fs::write(dir.join("results.json"), canon::to_canonical_string(&doc))?;
        Ok(())
    }

    pub fn load_from(dir: &Path) -> Result<Self, ProtocolError> {
        let text = std::fs::read_to_string(dir.join("results.json"))?;
        serde_json::from_str(&text).map_err(|e| ProtocolError::Malformed(e.to_string()))
    }
}

/// Everything one protocol execution produces.
#[derive(Debug, Clone)]
pub struct RoutineOutcome {
    pub data: Data,
    pub results: Results,
    pub updates: Vec<ConfigUpdate>,
    pub sections: Vec<SectionContent>,
}

/// A calibration protocol: acquisition, fit, update and report stages.
pub trait Routine: Send + Sync {
    fn name(&self) -> &'static str;

    fn target_kind(&self) -> TargetKind {
        TargetKind::Qubit
    }

    /// Registry defaults; a runcard may omit `parameters` entirely.
    fn default_params(&self) -> Value;

    /// Reject malformed or unknown parameter keys before execution.
    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError>;

    /// Leaf config fields this protocol is allowed to update.
    fn owned_fields(&self) -> &'static [&'static str];

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError>;

    /// Pure function of `Data`; failures surface as `FitQuality::Failed`.
    fn fit(&self, data: &Data) -> Results;

    fn update(&self, results: &Results, config: &PlatformConfig) -> Vec<ConfigUpdate>;

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent>;
}

/// Execute all four stages of a protocol against a live device.
pub fn run_routine(
    routine: &dyn Routine,
    config: &PlatformConfig,
    targets: &[String],
    params: &Value,
    device: &mut Device,
) -> Result<RoutineOutcome, ProtocolError> {
    let mut data = routine.acquire(config, targets, params, device)?;
    data.canonicalize();
    let results = routine.fit(&data);
    let updates = routine.update(&results, config);
    debug_assert!(
        updates.iter().all(|u| {
            routine
                .owned_fields()
                .iter()
                .any(|f| u.path.ends_with(f) || u.path.contains(&format!(".{f}.")))
        }),
        "{} updated a field outside its declared list",
        routine.name()
    );
    let sections = routine.report(&data, &results);
    Ok(RoutineOutcome {
        data,
        results,
        updates,
        sections,
    })
}

/// The protocol registry, keyed by runcard operation name.
pub fn registry() -> &'static BTreeMap<&'static str, Box<dyn Routine>> {
    static REGISTRY: OnceLock<BTreeMap<&'static str, Box<dyn Routine>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let routines: Vec<Box<dyn Routine>> = vec![
            Box::new(spectroscopy::ResonatorSpectroscopy),
            Box::new(spectroscopy::ResonatorPunchout),
            Box::new(spectroscopy::QubitSpectroscopy),
            Box::new(spectroscopy::QubitFluxDependence),
            Box::new(spectroscopy::ReadoutFrequencyOptimization),
            Box::new(rabi::Rabi),
            Box::new(rabi::Flipping),
            Box::new(rabi::DragTuning),
            Box::new(coherence::Ramsey),
            Box::new(coherence::CoherenceDecay),
            Box::new(classification::SingleShotClassification),
            Box::new(rb::StandardRb),
            Box::new(two_qubit::AvoidedCrossing),
            Box::new(two_qubit::Chevron),
            Box::new(two_qubit::CzVirtualPhase),
        ];
        routines.into_iter().map(|r| (r.name(), r)).collect()
    })
}

pub fn lookup(name: &str) -> Result<&'static dyn Routine, ProtocolError> {
    registry()
        .get(name)
        .map(|b| b.as_ref())
        .ok_or_else(|| ProtocolError::UnknownProtocol(name.to_string()))
}

/// Registered protocol names, for runcard validation messages.
pub fn protocol_names() -> Vec<&'static str> {
    registry().keys().copied().collect()
}

// ---------------------------------------------------------------------------
// Shared helpers used by the protocol implementations.
// ---------------------------------------------------------------------------

pub(crate) fn parse_params<T: serde::de::DeserializeOwned>(
    protocol: &str,
    params: &Value,
) -> Result<T, ProtocolError> {
    serde_json::from_value(params.clone()).map_err(|e| ProtocolError::BadParameters {
        protocol: protocol.to_string(),
        message: e.to_string(),
    })
}

pub(crate) fn resolved_params<T: Serialize>(params: &T) -> Value {
    serde_json::to_value(params).expect("params serialize")
}

pub(crate) fn qubit_config<'c>(
    config: &'c PlatformConfig,
    target: &str,
) -> Result<(&'c crate::platform::QubitCalibration, QubitId), ProtocolError> {
    let id = QubitId::new(target);
    config
        .qubits
        .get(&id)
        .map(|cal| (cal, id.clone()))
        .ok_or_else(|| ProtocolError::UnknownTarget {
            target: target.to_string(),
        })
}

pub(crate) fn pair_config<'c>(
    config: &'c PlatformConfig,
    target: &str,
) -> Result<&'c crate::platform::PairCalibration, ProtocolError> {
    config
        .pairs
        .get(target)
        .ok_or_else(|| ProtocolError::UnknownTarget {
            target: target.to_string(),
        })
}

/// Inclusive sweep from `min` to `max` with positive step.
pub(crate) fn sweep_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>, ProtocolError> {
    if !step.is_finite() || step <= 0.0 || !min.is_finite() || !max.is_finite() || max <= min {
        return Err(ProtocolError::Precondition(format!(
            "invalid sweep: min {min}, max {max}, step {step}"
        )));
    }
    let n = ((max - min) / step).round() as usize + 1;
    Ok((0..n).map(|i| min + step * i as f64).collect())
}

/// Symmetric sweep of `width` around `center`.
pub(crate) fn sweep_around(center: f64, width: f64, step: f64) -> Result<Vec<f64>, ProtocolError> {
    sweep_range(center - width / 2.0, center + width / 2.0, step)
}

/// Record the acquisition-time classifier into array metadata so the fit
/// stage stays a pure function of Data.
pub(crate) fn stamp_classifier(set: &mut ArraySet, classifier: Option<&ClassifierParams>) {
    if let Some(c) = classifier {
        set.set_meta("classifier_angle_rad", c.angle_rad);
        set.set_meta("classifier_threshold", c.threshold);
    }
}

/// Extraction of excitation probabilities from a shot-mode ArraySet.
pub(crate) struct ProbExtraction {
    pub probs: Vec<f64>,
    pub uncalibrated: bool,
}

/// Excitation probabilities of a shot-mode target ArraySet.
///
/// Prefers the exact "probability" array (shot sampling off). Otherwise
/// classifies "iq" shots with the classifier stamped at acquisition time;
/// with no classifier, falls back to projecting per-point mean IQ onto the
/// line between the two most separated point means (flagged uncalibrated,
/// orientation chosen by the caller).
pub(crate) fn extract_probabilities(set: &ArraySet) -> Result<ProbExtraction, String> {
    if let Some(arr) = set.array("probability") {
        let p = arr.as_f64().ok_or("probability array must be f64")?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err("non-finite probability".into());
        }
        return Ok(ProbExtraction {
            probs: p.to_vec(),
            uncalibrated: false,
        });
    }
    let iq = set.array("iq").ok_or("no probability or iq array")?;
    let shape = iq.shape();
    if shape.len() < 3 || shape[shape.len() - 1] != 2 {
        return Err(format!("unexpected iq shape {shape:?}"));
    }
    let nshots = shape[shape.len() - 2];
    let npoints: usize = shape[..shape.len() - 2].iter().product();
    let data = iq.as_f64().ok_or("iq array must be f64")?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err("non-finite iq sample".into());
    }

    let angle = set.meta_f64("classifier_angle_rad");
    let threshold = set.meta_f64("classifier_threshold");
    if let (Some(angle), Some(threshold)) = (angle, threshold) {
        let params = ClassifierParams {
            angle_rad: angle,
            threshold,
            assignment_fidelity: 1.0,
        };
        let mut probs = Vec::with_capacity(npoints);
        for point in 0..npoints {
            let base = point * nshots * 2;
            let shots: Vec<(f64, f64)> = (0..nshots)
                .map(|s| (data[base + 2 * s], data[base + 2 * s + 1]))
                .collect();
            let bits = crate::numerics::classify(&shots, &params);
            probs.push(bits.iter().map(|&b| b as f64).sum::<f64>() / nshots as f64);
        }
        return Ok(ProbExtraction {
            probs,
            uncalibrated: false,
        });
    }

    // Uncalibrated fallback: project point means onto the axis between the
    // two most separated means.
    let mut means = Vec::with_capacity(npoints);
    for point in 0..npoints {
        let base = point * nshots * 2;
        let mut mi = 0.0;
        let mut mq = 0.0;
        for s in 0..nshots {
            mi += data[base + 2 * s];
            mq += data[base + 2 * s + 1];
        }
        means.push((mi / nshots as f64, mq / nshots as f64));
    }
    let mut best = (0usize, 0usize);
    let mut best_d = -1.0;
    for i in 0..means.len() {
        for j in (i + 1)..means.len() {
            let d = (means[i].0 - means[j].0).powi(2) + (means[i].1 - means[j].1).powi(2);
            if d > best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    let lo = means[best.0];
    let axis = (means[best.1].0 - lo.0, means[best.1].1 - lo.1);
    let norm = best_d.max(1e-300);
    let probs = means
        .iter()
        .map(|m| (((m.0 - lo.0) * axis.0 + (m.1 - lo.1) * axis.1) / norm).clamp(0.0, 1.0))
        .collect();
    Ok(ProbExtraction {
        probs,
        uncalibrated: true,
    })
}

/// |signal| of a signal-mode target ArraySet.
pub(crate) fn extract_magnitude(set: &ArraySet, name: &str) -> Result<Vec<f64>, String> {
    let arr = set.array(name).ok_or_else(|| format!("no {name} array"))?;
    let c = arr.as_c64().ok_or_else(|| format!("{name} must be c64"))?;
    let mags: Vec<f64> = c.iter().map(|z| z.norm()).collect();
    if mags.iter().any(|v| !v.is_finite()) {
        return Err("non-finite signal".into());
    }
    Ok(mags)
}

pub(crate) fn extract_axis(set: &ArraySet, name: &str) -> Result<Vec<f64>, String> {
    let arr = set.array(name).ok_or_else(|| format!("no {name} array"))?;
    let v = arr.as_f64().ok_or_else(|| format!("{name} must be f64"))?;
    Ok(v.to_vec())
}

/// Three-point parabolic refinement of a grid extremum.
pub(crate) fn refine_extremum(xs: &[f64], ys: &[f64], idx: usize) -> f64 {
    if idx == 0 || idx + 1 >= xs.len() {
        return xs[idx];
    }
    let (y0, y1, y2) = (ys[idx - 1], ys[idx], ys[idx + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if denom.abs() < 1e-300 {
        return xs[idx];
    }
    let delta = 0.5 * (y0 - y2) / denom;
    let step = xs[idx + 1] - xs[idx];
    xs[idx] + delta.clamp(-1.0, 1.0) * step
}

/// Standard quality rule: relative stderr of a key parameter above 20%,
/// with the parameter scale supplied by the caller.
pub(crate) fn stderr_poor(stderr: f64, scale: f64) -> bool {
    !stderr.is_finite() || stderr > 0.2 * scale.abs().max(1e-300)
}

/// Build the standard per-target results table.
pub(crate) fn results_table(results: &Results) -> Table {
    let mut names: Vec<String> = Vec::new();
    for tr in results.per_target.values() {
        for key in tr.values.keys() {
            if !names.contains(key) {
                names.push(key.clone());
            }
        }
    }
    let mut header = vec!["target".to_string(), "quality".to_string()];
    header.extend(names.iter().cloned());
    let mut rows = Vec::new();
    for (target, tr) in &results.per_target {
        let mut row = vec![
            target.clone(),
            format!("{:?}", tr.quality).to_lowercase(),
        ];
        for name in &names {
            row.push(match tr.value(name) {
                Some(v) => format_value(v),
                None => "-".into(),
            });
        }
        rows.push(row);
    }
    Table { header, rows }
}

pub(crate) fn format_value(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (0.001..100_000.0).contains(&a) {
        format!("{v:.6}")
    } else {
        format!("{v:.6e}")
    }
}

#[cfg(test)]
mod tests;
