//! Calibrated device configuration: data model, serialization, validation
//! and update mechanics.
//!
//! A [`PlatformConfig`] is an immutable value after load; mutation happens
//! only through [`apply_update`], which produces a new validated value. The
//! on-disk form is a canonical `platform.json` inside a platform directory.

pub mod canon;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Environment variable naming the directory under which platform
/// directories are installed.
pub const PLATFORMS_ENV: &str = "QCAL_PLATFORMS";

const PLATFORM_FILE: &str = "platform.json";

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("platform file not found: {0}")]
    Missing(PathBuf),
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed platform document {path}: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invariant violation at {field}: {message}")]
    Invariant { field: String, message: String },
    #[error("unknown config path: {0}")]
    UnknownPath(String),
    #[error("invalid value for {path}: {message}")]
    InvalidValue { path: String, message: String },
    #[error("environment variable {PLATFORMS_ENV} is not set")]
    PlatformsEnvUnset,
}

/// Label of a qubit, unique within a platform (e.g. `"q0"`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QubitId(pub String);

impl QubitId {
    pub fn new(label: impl Into<String>) -> Self {
        QubitId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Labels appear in field paths and pair keys, so they must be non-empty
    /// and free of separator characters.
    fn validate(&self) -> Result<(), String> {
        if self.0.is_empty() {
            return Err("qubit label must be non-empty".into());
        }
        if !self
            .0
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            return Err(format!(
                "qubit label {:?} must contain only ASCII alphanumerics or '_'",
                self.0
            ));
        }
        Ok(())
    }
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// IQ-plane state discriminator: rotate by `angle_rad`, then threshold the
/// rotated in-phase component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub angle_rad: f64,
    pub threshold: f64,
    pub assignment_fidelity: f64,
}

/// Per-qubit calibrated parameters. Optional fields are `None` until the
/// corresponding protocol has run, and serialize as explicit nulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub readout_frequency_hz: f64,
    pub readout_amplitude: f64,
    pub drive_frequency_hz: f64,
    pub pi_pulse_amplitude: f64,
    pub pi_pulse_duration_ns: f64,
    pub drag_beta: f64,
    pub sweetspot_v: f64,
    pub flux_bias_v: f64,
    pub t1_ns: Option<f64>,
    pub t2_ramsey_ns: Option<f64>,
    pub t2_echo_ns: Option<f64>,
    pub readout_fidelity: Option<f64>,
    pub classifier: Option<ClassifierParams>,
}

/// Per-pair calibrated parameters for the flux-pulsed CZ gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCalibration {
    pub qubit_a: QubitId,
    pub qubit_b: QubitId,
    pub coupling_hz: f64,
    pub cz_flux_amplitude: f64,
    pub cz_duration_ns: f64,
    pub conditional_phase_rad: f64,
    pub virtual_phase_rad: BTreeMap<QubitId, f64>,
}

/// The calibrated configuration of a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformConfig {
    pub name: String,
    pub qubits: BTreeMap<QubitId, QubitCalibration>,
    pub pairs: BTreeMap<String, PairCalibration>,
}

/// Range check for angles constrained to `(-pi, pi]`, with slack for the
/// 12-significant-digit canonical float rounding.
fn phase_in_range(angle: f64) -> bool {
    const SLACK: f64 = 1e-9;
    angle.is_finite()
        && angle > -std::f64::consts::PI - SLACK
        && angle <= std::f64::consts::PI + SLACK
}

/// Canonical key for a qubit pair: lexicographically smaller label first.
pub fn pair_key(a: &QubitId, b: &QubitId) -> String {
    if a.as_str() <= b.as_str() {
        format!("{a}-{b}")
    } else {
        format!("{b}-{a}")
    }
}

/// One leaf-level difference between two configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDiff {
    pub path: String,
    pub old: Value,
    pub new: Value,
}

/// A single config mutation: dotted field path plus the new JSON value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigUpdate {
    pub path: String,
    pub value: Value,
}

impl ConfigUpdate {
    pub fn new(path: impl Into<String>, value: impl Into<Value>) -> Self {
        ConfigUpdate {
            path: path.into(),
            value: value.into(),
        }
    }
}

impl PlatformConfig {
    /// Check every invariant, reporting the first violation with its field path.
    // Negated comparisons reject NaN alongside the out-of-range values.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), PlatformError> {
        let err = |field: String, message: String| PlatformError::Invariant { field, message };
        for (id, cal) in &self.qubits {
            id.validate()
                .map_err(|m| err(format!("qubits.{id}"), m))?;
            let base = format!("qubits.{id}");
            let positive = [
                ("readout_frequency_hz", cal.readout_frequency_hz),
                ("drive_frequency_hz", cal.drive_frequency_hz),
                ("pi_pulse_duration_ns", cal.pi_pulse_duration_ns),
            ];
            for (name, v) in positive {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(err(format!("{base}.{name}"), format!("must be > 0, got {v}")));
                }
            }
            let unit = [
                ("readout_amplitude", cal.readout_amplitude),
                ("pi_pulse_amplitude", cal.pi_pulse_amplitude),
            ];
            for (name, v) in unit {
                if !(0.0..=1.0).contains(&v) {
                    return Err(err(
                        format!("{base}.{name}"),
                        format!("must be in [0, 1], got {v}"),
                    ));
                }
            }
            for (name, v) in [("drag_beta", cal.drag_beta), ("sweetspot_v", cal.sweetspot_v), ("flux_bias_v", cal.flux_bias_v)] {
                if !v.is_finite() {
                    return Err(err(format!("{base}.{name}"), format!("must be finite, got {v}")));
                }
            }
            for (name, v) in [
                ("t1_ns", cal.t1_ns),
                ("t2_ramsey_ns", cal.t2_ramsey_ns),
                ("t2_echo_ns", cal.t2_echo_ns),
            ] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        return Err(err(format!("{base}.{name}"), format!("must be > 0, got {v}")));
                    }
                }
            }
            if let (Some(t1), Some(t2)) = (cal.t1_ns, cal.t2_ramsey_ns) {
                if t2 > 2.0 * t1 {
                    return Err(err(
                        format!("{base}.t2_ramsey_ns"),
                        format!("t2_ramsey_ns = {t2} exceeds 2*t1_ns = {}", 2.0 * t1),
                    ));
                }
            }
            if let (Some(t1), Some(t2)) = (cal.t1_ns, cal.t2_echo_ns) {
                if t2 > 2.0 * t1 {
                    return Err(err(
                        format!("{base}.t2_echo_ns"),
                        format!("t2_echo_ns = {t2} exceeds 2*t1_ns = {}", 2.0 * t1),
                    ));
                }
            }
            if let Some(f) = cal.readout_fidelity {
                if !(0.0..=1.0).contains(&f) {
                    return Err(err(
                        format!("{base}.readout_fidelity"),
                        format!("must be in [0, 1], got {f}"),
                    ));
                }
            }
            if let Some(c) = &cal.classifier {
                if !phase_in_range(c.angle_rad) {
                    return Err(err(
                        format!("{base}.classifier.angle_rad"),
                        format!("must be in (-pi, pi], got {}", c.angle_rad),
                    ));
                }
                if !(0.0..=1.0).contains(&c.assignment_fidelity) {
                    return Err(err(
                        format!("{base}.classifier.assignment_fidelity"),
                        format!("must be in [0, 1], got {}", c.assignment_fidelity),
                    ));
                }
                if !c.threshold.is_finite() {
                    return Err(err(
                        format!("{base}.classifier.threshold"),
                        "must be finite".into(),
                    ));
                }
            }
        }
        for (key, pair) in &self.pairs {
            let base = format!("pairs.{key}");
            for q in [&pair.qubit_a, &pair.qubit_b] {
                if !self.qubits.contains_key(q) {
                    return Err(err(base.clone(), format!("references unknown qubit {q:?}")));
                }
            }
            if pair.qubit_a == pair.qubit_b {
                return Err(err(base.clone(), "pair qubits must differ".into()));
            }
            if *key != pair_key(&pair.qubit_a, &pair.qubit_b) {
                return Err(err(
                    base.clone(),
                    format!(
                        "key must be {:?} (smaller label first)",
                        pair_key(&pair.qubit_a, &pair.qubit_b)
                    ),
                ));
            }
            if !(pair.coupling_hz >= 0.0) {
                return Err(err(
                    format!("{base}.coupling_hz"),
                    format!("must be >= 0, got {}", pair.coupling_hz),
                ));
            }
            if !(pair.cz_duration_ns > 0.0) {
                return Err(err(
                    format!("{base}.cz_duration_ns"),
                    format!("must be > 0, got {}", pair.cz_duration_ns),
                ));
            }
            if !pair.cz_flux_amplitude.is_finite() {
                return Err(err(format!("{base}.cz_flux_amplitude"), "must be finite".into()));
            }
            if !phase_in_range(pair.conditional_phase_rad) {
                return Err(err(
                    format!("{base}.conditional_phase_rad"),
                    format!("must be in (-pi, pi], got {}", pair.conditional_phase_rad),
                ));
            }
            let expected: std::collections::BTreeSet<_> =
                [pair.qubit_a.clone(), pair.qubit_b.clone()].into();
            let actual: std::collections::BTreeSet<_> =
                pair.virtual_phase_rad.keys().cloned().collect();
            if actual != expected {
                return Err(err(
                    format!("{base}.virtual_phase_rad"),
                    "must carry exactly the pair's two qubits".into(),
                ));
            }
        }
        Ok(())
    }

    /// Serialize to a canonical JSON value (floats rounded, keys sorted).
    pub fn to_canonical_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        canon::canonicalize(&mut v);
        v
    }

    fn from_value(value: Value, origin: &Path) -> Result<Self, PlatformError> {
        let mut value = value;
        canon::canonicalize(&mut value);
        let config: PlatformConfig =
            serde_json::from_value(value).map_err(|source| PlatformError::Malformed {
                path: origin.to_path_buf(),
                source,
            })?;
        config.validate()?;
        Ok(config)
    }
}

/// Resolve a platform directory by name under `QCAL_PLATFORMS`.
pub fn resolve_platform_dir(name: &str) -> Result<PathBuf, PlatformError> {
    let root = std::env::var_os(PLATFORMS_ENV).ok_or(PlatformError::PlatformsEnvUnset)?;
    Ok(PathBuf::from(root).join(name))
}

/// Parse and validate a config from JSON text in the platform.json schema.
pub fn platform_from_json(text: &str, origin: &Path) -> Result<PlatformConfig, PlatformError> {
    let value: Value =
        serde_json::from_str(text).map_err(|source| PlatformError::Malformed {
            path: origin.to_path_buf(),
            source,
        })?;
    PlatformConfig::from_value(value, origin)
}

/// Load and validate `platform.json` from a platform directory.
pub fn load_platform(dir: &Path) -> Result<PlatformConfig, PlatformError> {
    let path = dir.join(PLATFORM_FILE);
    if !path.is_file() {
        return Err(PlatformError::Missing(path));
    }
    let text = std::fs::read_to_string(&path).map_err(|source| PlatformError::Io {
        path: path.clone(),
        source,
    })?;
    platform_from_json(&text, &path)
}

/// Canonical JSON text of a config, as written to `platform.json`.
pub fn platform_json_string(config: &PlatformConfig) -> String {
    canon::to_canonical_string(&config.to_canonical_value())
}

/// Write a validated config as canonical `platform.json` into a platform
/// directory, creating the directory if needed.
pub fn save_platform(config: &PlatformConfig, dir: &Path) -> Result<(), PlatformError> {
    config.validate()?;
    std::fs::create_dir_all(dir).map_err(|source| PlatformError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(PLATFORM_FILE);
    let text = canon::to_canonical_string(&config.to_canonical_value());
    std::fs::write(&path, text).map_err(|source| PlatformError::Io { path, source })
}

/// List every leaf-level difference between two configs. Empty iff equal.
pub fn diff_platforms(a: &PlatformConfig, b: &PlatformConfig) -> Vec<FieldDiff> {
    let mut diffs = Vec::new();
    walk_diff(
        &a.to_canonical_value(),
        &b.to_canonical_value(),
        String::new(),
        &mut diffs,
    );
    diffs
}

fn walk_diff(a: &Value, b: &Value, path: String, out: &mut Vec<FieldDiff>) {
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            let keys: std::collections::BTreeSet<_> = ma.keys().chain(mb.keys()).collect();
            for key in keys {
                let sub = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                match (ma.get(key), mb.get(key)) {
                    (Some(va), Some(vb)) => walk_diff(va, vb, sub, out),
                    (Some(va), None) => out.push(FieldDiff {
                        path: sub,
                        old: va.clone(),
                        new: Value::Null,
                    }),
                    (None, Some(vb)) => out.push(FieldDiff {
                        path: sub,
                        old: Value::Null,
                        new: vb.clone(),
                    }),
                    (None, None) => unreachable!(),
                }
            }
        }
        _ => {
            if a != b {
                out.push(FieldDiff {
                    path,
                    old: a.clone(),
                    new: b.clone(),
                });
            }
        }
    }
}

/// Apply a list of updates atomically: either every path resolves and the
/// resulting config is valid, or the error leaves the input untouched.
pub fn apply_update(
    config: &PlatformConfig,
    updates: &[ConfigUpdate],
) -> Result<PlatformConfig, PlatformError> {
    let mut tree = config.to_canonical_value();
    for update in updates {
        set_path(&mut tree, &update.path, update.value.clone())?;
    }
    PlatformConfig::from_value(tree, Path::new("<update>"))
}

fn set_path(tree: &mut Value, path: &str, value: Value) -> Result<(), PlatformError> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(PlatformError::UnknownPath(path.to_string()));
    }
    let mut node = tree;
    for segment in &segments[..segments.len() - 1] {
        node = match node {
            Value::Object(map) => map
                .get_mut(*segment)
                .ok_or_else(|| PlatformError::UnknownPath(path.to_string()))?,
            _ => return Err(PlatformError::UnknownPath(path.to_string())),
        };
    }
    let last = segments[segments.len() - 1];
    match node {
        Value::Object(map) => {
            let slot = map
                .get_mut(last)
                .ok_or_else(|| PlatformError::UnknownPath(path.to_string()))?;
            check_kind(slot, &value, path)?;
            *slot = value;
            Ok(())
        }
        _ => Err(PlatformError::UnknownPath(path.to_string())),
    }
}

/// A null slot accepts anything (optional fields); otherwise the JSON kind
/// must match so type errors are reported against the offending path.
fn check_kind(current: &Value, incoming: &Value, path: &str) -> Result<(), PlatformError> {
    let kind = |v: &Value| match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    };
    if matches!(current, Value::Null) || matches!(incoming, Value::Null) {
        return Ok(());
    }
    if kind(current) != kind(incoming) {
        return Err(PlatformError::InvalidValue {
            path: path.to_string(),
            message: format!("expected {}, got {}", kind(current), kind(incoming)),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
