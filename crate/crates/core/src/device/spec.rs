//! Acquisition requests and their named-array results.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::DeviceError;
use crate::platform::QubitId;

/// Snapshot of the configured drive pulse, consumed by the Clifford engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    pub amplitude: f64,
    pub duration_ns: f64,
    pub frequency_hz: f64,
    pub drag_beta: f64,
}

/// One acquisition request, tagged by experiment kind.
///
/// Shot-mode variants carry the configured readout frequency so IQ encoding
/// matches the geometry the classifier was trained on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    ReadoutSweep {
        qubit: QubitId,
        frequencies_hz: Vec<f64>,
        readout_amplitude: f64,
        prepared_state: u8,
        /// Averaging count: IQ noise scales as `iq_sigma / sqrt(nshots)`.
        nshots: u32,
    },
    PunchoutSweep {
        qubit: QubitId,
        frequencies_hz: Vec<f64>,
        amplitudes: Vec<f64>,
        nshots: u32,
    },
    DriveSweep {
        qubit: QubitId,
        frequencies_hz: Vec<f64>,
        bias_v: f64,
        nshots: u32,
    },
    FluxMap {
        qubit: QubitId,
        frequencies_hz: Vec<f64>,
        biases_v: Vec<f64>,
        nshots: u32,
    },
    RabiAmplitude {
        qubit: QubitId,
        amplitudes: Vec<f64>,
        drive_frequency_hz: f64,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    RabiDuration {
        qubit: QubitId,
        durations_ns: Vec<f64>,
        drive_amplitude: f64,
        drive_frequency_hz: f64,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    Ramsey {
        qubit: QubitId,
        delays_ns: Vec<f64>,
        drive_frequency_hz: f64,
        artificial_detuning_hz: f64,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    T1 {
        qubit: QubitId,
        delays_ns: Vec<f64>,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    Echo {
        qubit: QubitId,
        delays_ns: Vec<f64>,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    Flipping {
        qubit: QubitId,
        n_flips: Vec<u32>,
        set_amplitude: f64,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    Shots {
        qubit: QubitId,
        prepared_state: u8,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    DragSweep {
        qubit: QubitId,
        betas: Vec<f64>,
        repetitions: u32,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    CliffordSequences {
        qubit: QubitId,
        sequences: Vec<Vec<u8>>,
        pulse: PulseConfig,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    AvoidedCrossing {
        pair: String,
        frequencies_hz: Vec<f64>,
        biases_v: Vec<f64>,
        nshots: u32,
    },
    Chevron {
        pair: String,
        amplitudes: Vec<f64>,
        durations_ns: Vec<f64>,
        readout_frequency_hz: f64,
        nshots: u32,
    },
    CzPhase {
        pair: String,
        phases_rad: Vec<f64>,
        control_state: u8,
        readout_frequency_hz: f64,
        nshots: u32,
    },
}

fn check_sweep(name: &str, values: &[f64]) -> Result<(), DeviceError> {
    if values.is_empty() {
        return Err(DeviceError::InvalidSpec(format!("{name} sweep is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(DeviceError::InvalidSpec(format!("{name} sweep has non-finite values")));
    }
    if values.len() > 1 && values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DeviceError::InvalidSpec(format!(
            "{name} sweep must be strictly increasing"
        )));
    }
    Ok(())
}

fn check_state(name: &str, state: u8) -> Result<(), DeviceError> {
    if state > 1 {
        return Err(DeviceError::InvalidSpec(format!("{name} must be 0 or 1, got {state}")));
    }
    Ok(())
}

fn check_nshots(nshots: u32) -> Result<(), DeviceError> {
    if nshots == 0 {
        return Err(DeviceError::InvalidSpec("nshots must be >= 1".into()));
    }
    Ok(())
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), DeviceError> {
        use ExperimentSpec::*;
        match self {
            ReadoutSweep { frequencies_hz, prepared_state, readout_amplitude, nshots, .. } => {
                check_sweep("frequency", frequencies_hz)?;
                check_state("prepared_state", *prepared_state)?;
                if !readout_amplitude.is_finite() || *readout_amplitude <= 0.0 {
                    return Err(DeviceError::InvalidSpec("readout_amplitude must be > 0".into()));
                }
                check_nshots(*nshots)
            }
            PunchoutSweep { frequencies_hz, amplitudes, nshots, .. } => {
                check_sweep("frequency", frequencies_hz)?;
                check_sweep("amplitude", amplitudes)?;
                check_nshots(*nshots)
            }
            DriveSweep { frequencies_hz, nshots, .. } => {
                check_sweep("frequency", frequencies_hz)?;
                check_nshots(*nshots)
            }
            FluxMap { frequencies_hz, biases_v, nshots, .. } => {
                check_sweep("frequency", frequencies_hz)?;
                check_sweep("bias", biases_v)?;
                check_nshots(*nshots)
            }
            RabiAmplitude { amplitudes, nshots, .. } => {
                check_sweep("amplitude", amplitudes)?;
                check_nshots(*nshots)
            }
            RabiDuration { durations_ns, nshots, .. } => {
                check_sweep("duration", durations_ns)?;
                check_nshots(*nshots)
            }
            Ramsey { delays_ns, nshots, .. }
            | T1 { delays_ns, nshots, .. }
            | Echo { delays_ns, nshots, .. } => {
                check_sweep("delay", delays_ns)?;
                check_nshots(*nshots)
            }
            Flipping { n_flips, nshots, .. } => {
                if n_flips.is_empty() {
                    return Err(DeviceError::InvalidSpec("n_flips sweep is empty".into()));
                }
                if n_flips.len() > 1 && n_flips.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(DeviceError::InvalidSpec(
                        "n_flips must be strictly increasing".into(),
                    ));
                }
                check_nshots(*nshots)
            }
            Shots { prepared_state, nshots, .. } => {
                check_state("prepared_state", *prepared_state)?;
                check_nshots(*nshots)
            }
            DragSweep { betas, nshots, .. } => {
                check_sweep("beta", betas)?;
                check_nshots(*nshots)
            }
            CliffordSequences { sequences, nshots, .. } => {
                if sequences.is_empty() {
                    return Err(DeviceError::InvalidSpec("sequences list is empty".into()));
                }
                for seq in sequences {
                    if seq.iter().any(|&i| i >= 24) {
                        return Err(DeviceError::InvalidSpec(
                            "Clifford indices must be < 24".into(),
                        ));
                    }
                }
                check_nshots(*nshots)
            }
            AvoidedCrossing { frequencies_hz, biases_v, nshots, .. } => {
                check_sweep("frequency", frequencies_hz)?;
                check_sweep("bias", biases_v)?;
                check_nshots(*nshots)
            }
            Chevron { amplitudes, durations_ns, nshots, .. } => {
                check_sweep("amplitude", amplitudes)?;
                check_sweep("duration", durations_ns)?;
                check_nshots(*nshots)
            }
            CzPhase { phases_rad, control_state, nshots, .. } => {
                check_sweep("phase", phases_rad)?;
                check_state("control_state", *control_state)?;
                check_nshots(*nshots)
            }
        }
    }
}

/// Scalar metadata attached to an [`ArraySet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Bool(bool),
    I64(i64),
    F64(f64),
    Str(String),
}

impl From<&str> for MetaValue {
    fn from(v: &str) -> Self {
        MetaValue::Str(v.to_string())
    }
}
impl From<f64> for MetaValue {
    fn from(v: f64) -> Self {
        MetaValue::F64(v)
    }
}
impl From<i64> for MetaValue {
    fn from(v: i64) -> Self {
        MetaValue::I64(v)
    }
}
impl From<u32> for MetaValue {
    fn from(v: u32) -> Self {
        MetaValue::I64(v as i64)
    }
}

impl MetaValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            MetaValue::F64(v) => Some(*v),
            MetaValue::I64(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            MetaValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    C64(Vec<Complex64>),
}

impl ArrayData {
    fn dtype(&self) -> &'static str {
        match self {
            ArrayData::F64(_) => "f64",
            ArrayData::C64(_) => "c64",
        }
    }
}

/// A shaped, typed array. Complex elements serialize as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    shape: Vec<usize>,
    data: ArrayData,
}

impl NamedArray {
    /// Round all float payloads to the canonical 12-significant-digit
    /// resolution used on disk, making serialization lossless.
    pub fn canonicalize(&mut self) {
        use crate::platform::canon::canon_f64;
        match &mut self.data {
            ArrayData::F64(v) => v.iter_mut().for_each(|x| *x = canon_f64(*x)),
            ArrayData::C64(v) => v.iter_mut().for_each(|z| {
                z.re = canon_f64(z.re);
                z.im = canon_f64(z.im);
            }),
        }
    }

    pub fn f64(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape mismatch");
        NamedArray {
            shape,
            data: ArrayData::F64(data),
        }
    }

    pub fn c64(shape: Vec<usize>, data: Vec<Complex64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape mismatch");
        NamedArray {
            shape,
            data: ArrayData::C64(data),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.data {
            ArrayData::F64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_c64(&self) -> Option<&[Complex64]> {
        match &self.data {
            ArrayData::C64(v) => Some(v),
            _ => None,
        }
    }
}

impl Serialize for NamedArray {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("NamedArray", 3)?;
        s.serialize_field("dtype", self.data.dtype())?;
        s.serialize_field("shape", &self.shape)?;
        s.serialize_field("data", &nest(&self.shape, &self.data))?;
        s.end()
    }
}

/// Build the nested JSON representation of a flat array.
fn nest(shape: &[usize], data: &ArrayData) -> Value {
    fn leaf(data: &ArrayData, index: usize) -> Value {
        match data {
            ArrayData::F64(v) => serde_json::json!(v[index]),
            ArrayData::C64(v) => serde_json::json!([v[index].re, v[index].im]),
        }
    }
    fn build(shape: &[usize], data: &ArrayData, offset: usize) -> Value {
        match shape {
            [] => leaf(data, offset),
            [n, rest @ ..] => {
                let stride: usize = rest.iter().product();
                Value::Array(
                    (0..*n)
                        .map(|i| build(rest, data, offset + i * stride))
                        .collect(),
                )
            }
        }
    }
    build(shape, data, 0)
}

impl<'de> Deserialize<'de> for NamedArray {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        struct Raw {
            dtype: String,
            shape: Vec<usize>,
            data: Value,
        }
        let raw = Raw::deserialize(deserializer)?;
        let expected: usize = raw.shape.iter().product();
        match raw.dtype.as_str() {
            "f64" => {
                let mut flat = Vec::with_capacity(expected);
                flatten_f64(&raw.data, &raw.shape, &mut flat).map_err(D::Error::custom)?;
                if flat.len() != expected {
                    return Err(D::Error::custom("array length does not match shape"));
                }
                Ok(NamedArray::f64(raw.shape, flat))
            }
            "c64" => {
                let mut flat = Vec::with_capacity(expected);
                flatten_c64(&raw.data, &raw.shape, &mut flat).map_err(D::Error::custom)?;
                if flat.len() != expected {
                    return Err(D::Error::custom("array length does not match shape"));
                }
                Ok(NamedArray::c64(raw.shape, flat))
            }
            other => Err(D::Error::custom(format!("unknown dtype {other:?}"))),
        }
    }
}

fn flatten_f64(value: &Value, shape: &[usize], out: &mut Vec<f64>) -> Result<(), String> {
    match shape {
        [] => {
            let x = value.as_f64().ok_or("expected a number")?;
            out.push(x);
            Ok(())
        }
        [n, rest @ ..] => {
            let items = value.as_array().ok_or("expected an array")?;
            if items.len() != *n {
                return Err("nested array length does not match shape".into());
            }
            for item in items {
                flatten_f64(item, rest, out)?;
            }
            Ok(())
        }
    }
}

fn flatten_c64(value: &Value, shape: &[usize], out: &mut Vec<Complex64>) -> Result<(), String> {
    match shape {
        [] => {
            let pair = value.as_array().ok_or("expected an [re, im] pair")?;
            if pair.len() != 2 {
                return Err("complex element must be an [re, im] pair".into());
            }
            let re = pair[0].as_f64().ok_or("expected a number")?;
            let im = pair[1].as_f64().ok_or("expected a number")?;
            out.push(Complex64::new(re, im));
            Ok(())
        }
        [n, rest @ ..] => {
            let items = value.as_array().ok_or("expected an array")?;
            if items.len() != *n {
                return Err("nested array length does not match shape".into());
            }
            for item in items {
                flatten_c64(item, rest, out)?;
            }
            Ok(())
        }
    }
}

/// Named arrays with attached scalar metadata: the raw result of one
/// acquisition on one target.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArraySet {
    pub arrays: BTreeMap<String, NamedArray>,
    pub metadata: BTreeMap<String, MetaValue>,
}

impl ArraySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// See [`NamedArray::canonicalize`].
    pub fn canonicalize(&mut self) {
        use crate::platform::canon::canon_f64;
        self.arrays.values_mut().for_each(NamedArray::canonicalize);
        for value in self.metadata.values_mut() {
            if let MetaValue::F64(x) = value {
                *x = canon_f64(*x);
            }
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, array: NamedArray) {
        self.arrays.insert(name.into(), array);
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<MetaValue>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn array(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.get(name)
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.metadata.get(key).and_then(MetaValue::as_f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_array_round_trips_f64() {
        let arr = NamedArray::f64(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let json = serde_json::to_value(&arr).unwrap();
        assert_eq!(json["dtype"], "f64");
        assert_eq!(json["data"][1][2], 6.0);
        let back: NamedArray = serde_json::from_value(json).unwrap();
        assert_eq!(back, arr);
    }

    #[test]
    fn named_array_round_trips_c64() {
        let arr = NamedArray::c64(
            vec![2],
            vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)],
        );
        let json = serde_json::to_value(&arr).unwrap();
        assert_eq!(json["data"][0][1], -2.0);
        let back: NamedArray = serde_json::from_value(json).unwrap();
        assert_eq!(back, arr);
    }

    #[test]
    fn shape_mismatch_is_rejected_on_load() {
        let json = serde_json::json!({"dtype": "f64", "shape": [3], "data": [1.0, 2.0]});
        assert!(serde_json::from_value::<NamedArray>(json).is_err());
    }

    #[test]
    fn spec_validation_rejects_unsorted_sweeps() {
        let spec = ExperimentSpec::DriveSweep {
            qubit: QubitId::new("q0"),
            frequencies_hz: vec![2.0, 1.0],
            bias_v: 0.0,
            nshots: 1,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_validation_rejects_zero_shots() {
        let spec = ExperimentSpec::Shots {
            qubit: QubitId::new("q0"),
            prepared_state: 1,
            readout_frequency_hz: 7.0e9,
            nshots: 0,
        };
        assert!(spec.validate().is_err());
    }
}
