//! Hidden ground-truth parameters of the virtual device.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DeviceError;
use crate::platform::canon;
use crate::platform::QubitId;

const TRUTH_FILE: &str = "truth.json";

/// Ground-truth physics of one qubit and its readout resonator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QubitTruth {
    pub f_r_bare_hz: f64,
    pub f_r_dressed_hz: f64,
    /// Dispersive shift: the resonator responds at `f_r_dressed + chi` for
    /// |0> and `f_r_dressed - chi` for |1>.
    pub chi_hz: f64,
    pub resonator_linewidth_hz: f64,
    /// Readout amplitudes above this reveal the bare resonator.
    pub punchout_amplitude: f64,
    pub f_q_max_hz: f64,
    pub v_sweetspot: f64,
    /// Volts per flux quantum.
    pub v_period: f64,
    /// Pi-pulse amplitude at the reference duration.
    pub a_pi_true: f64,
    /// Drive duration at which `a_pi_true` produces a pi rotation.
    pub pi_duration_ref_ns: f64,
    pub drag_beta_opt: f64,
    /// Two-tone linewidth; also sets the off-resonance contrast scale.
    pub drive_linewidth_hz: f64,
    /// Relaxation time at the sweetspot.
    pub t1_ns: f64,
    /// Ramsey dephasing time at the sweetspot.
    pub t2_ns: f64,
    /// T1 increase per Hz of detuning below the sweetspot frequency.
    #[serde(default)]
    pub t1_detuning_slope_ns_per_hz: f64,
    /// T2 suppression rate: `t2_eff = t2 / (1 + slope * detuning)`.
    #[serde(default)]
    pub t2_detuning_slope_per_hz: f64,
    /// Per-shot Gaussian IQ noise (volts, one sigma per quadrature).
    pub iq_sigma: f64,
    /// Scale from the dimensionless S21 response to IQ volts.
    pub readout_gain: f64,
}

impl QubitTruth {
    /// Flux dependence `f_q(V) = f_max * sqrt(|cos(pi (V - V_ss) / V_p)|)`.
    pub fn qubit_frequency_hz(&self, bias_v: f64) -> f64 {
        let phase = std::f64::consts::PI * (bias_v - self.v_sweetspot) / self.v_period;
        self.f_q_max_hz * phase.cos().abs().sqrt()
    }

    /// Detuning below the sweetspot frequency at a bias, always >= 0.
    pub fn detuning_hz(&self, bias_v: f64) -> f64 {
        (self.f_q_max_hz - self.qubit_frequency_hz(bias_v)).max(0.0)
    }

    pub fn t1_eff_ns(&self, bias_v: f64) -> f64 {
        self.t1_ns + self.t1_detuning_slope_ns_per_hz * self.detuning_hz(bias_v)
    }

    pub fn t2_eff_ns(&self, bias_v: f64) -> f64 {
        let t2 = self.t2_ns / (1.0 + self.t2_detuning_slope_per_hz * self.detuning_hz(bias_v));
        t2.min(2.0 * self.t1_eff_ns(bias_v))
    }

    /// Echo exceeds the Ramsey time but is capped by relaxation.
    pub fn t2_echo_eff_ns(&self, bias_v: f64) -> f64 {
        (1.5 * self.t2_eff_ns(bias_v)).min(2.0 * self.t1_eff_ns(bias_v))
    }

    // Negated comparisons are deliberate: they reject NaN while still
    // accepting infinite coherence times for idealized devices.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self, label: &str) -> Result<(), DeviceError> {
        let err = |field: &str, message: String| DeviceError::InvalidTruth {
            field: format!("qubits.{label}.{field}"),
            message,
        };
        let positive = [
            ("f_r_bare_hz", self.f_r_bare_hz),
            ("f_r_dressed_hz", self.f_r_dressed_hz),
            ("chi_hz", self.chi_hz),
            ("resonator_linewidth_hz", self.resonator_linewidth_hz),
            ("punchout_amplitude", self.punchout_amplitude),
            ("f_q_max_hz", self.f_q_max_hz),
            ("v_period", self.v_period),
            ("a_pi_true", self.a_pi_true),
            ("pi_duration_ref_ns", self.pi_duration_ref_ns),
            ("drive_linewidth_hz", self.drive_linewidth_hz),
            ("t1_ns", self.t1_ns),
            ("t2_ns", self.t2_ns),
            ("readout_gain", self.readout_gain),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(err(name, format!("must be > 0, got {v}")));
            }
        }
        if self.t2_ns > 2.0 * self.t1_ns {
            return Err(err(
                "t2_ns",
                format!("t2_ns = {} exceeds 2*t1_ns = {}", self.t2_ns, 2.0 * self.t1_ns),
            ));
        }
        if !(self.chi_hz < 10.0 * self.resonator_linewidth_hz) {
            return Err(err(
                "chi_hz",
                "dispersive shift must stay below 10 resonator linewidths".into(),
            ));
        }
        if !(self.iq_sigma >= 0.0) || !self.iq_sigma.is_finite() {
            return Err(err("iq_sigma", format!("must be >= 0, got {}", self.iq_sigma)));
        }
        for (name, v) in [
            ("v_sweetspot", self.v_sweetspot),
            ("drag_beta_opt", self.drag_beta_opt),
            ("t1_detuning_slope_ns_per_hz", self.t1_detuning_slope_ns_per_hz),
            ("t2_detuning_slope_per_hz", self.t2_detuning_slope_per_hz),
        ] {
            if !v.is_finite() {
                return Err(err(name, format!("must be finite, got {v}")));
            }
        }
        if self.t1_detuning_slope_ns_per_hz < 0.0 || self.t2_detuning_slope_per_hz < 0.0 {
            return Err(err("t1_detuning_slope_ns_per_hz", "slopes must be >= 0".into()));
        }
        Ok(())
    }
}

/// Ground truth for one coupled pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTruth {
    /// Exchange coupling g.
    pub g_hz: f64,
    /// Flux-pulse amplitude bringing |11> and |20> on resonance.
    pub a_resonance: f64,
    /// delta(a) = slope * (a - a_resonance).
    pub detuning_slope_hz_per_unit: f64,
    /// Single-qubit phases imparted by the CZ flux pulse.
    pub phi_a_rad: f64,
    pub phi_b_rad: f64,
    /// Conditional phase at the calibrated point.
    pub phi_cond_rad: f64,
}

impl PairTruth {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self, key: &str) -> Result<(), DeviceError> {
        let err = |field: &str, message: String| DeviceError::InvalidTruth {
            field: format!("pairs.{key}.{field}"),
            message,
        };
        if !(self.g_hz > 0.0) {
            return Err(err("g_hz", format!("must be > 0, got {}", self.g_hz)));
        }
        if self.detuning_slope_hz_per_unit == 0.0 || !self.detuning_slope_hz_per_unit.is_finite()
        {
            return Err(err(
                "detuning_slope_hz_per_unit",
                "must be non-zero and finite".into(),
            ));
        }
        for (name, v) in [
            ("a_resonance", self.a_resonance),
            ("phi_a_rad", self.phi_a_rad),
            ("phi_b_rad", self.phi_b_rad),
            ("phi_cond_rad", self.phi_cond_rad),
        ] {
            if !v.is_finite() {
                return Err(err(name, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Stochastic model of the virtual device.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModel {
    pub seed: u64,
    /// When set, shot-mode acquisitions sample discrete IQ shots; when
    /// clear, they return closed-form probabilities.
    pub shot_sampling: bool,
}

/// The full hidden state backing a virtual device.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceTruth {
    pub qubits: BTreeMap<QubitId, QubitTruth>,
    /// Keyed like platform pairs: `"qA-qB"`, smaller label first.
    pub pairs: BTreeMap<String, PairTruth>,
    pub noise: NoiseModel,
}

impl DeviceTruth {
    pub fn validate(&self) -> Result<(), DeviceError> {
        for (id, qt) in &self.qubits {
            qt.validate(id.as_str())?;
        }
        for (key, pt) in &self.pairs {
            pt.validate(key)?;
            let mut parts = key.splitn(2, '-');
            let (a, b) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
            for label in [a, b] {
                if !self.qubits.contains_key(&QubitId::new(label)) {
                    return Err(DeviceError::InvalidTruth {
                        field: format!("pairs.{key}"),
                        message: format!("references unknown qubit {label:?}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Labels of a pair key, in key order.
    pub fn pair_qubits(key: &str) -> (QubitId, QubitId) {
        let mut parts = key.splitn(2, '-');
        (
            QubitId::new(parts.next().unwrap_or("")),
            QubitId::new(parts.next().unwrap_or("")),
        )
    }
}

/// Load `truth.json` from a platform directory; absence is an error for the
/// virtual backend.
pub fn load_truth(dir: &Path) -> Result<DeviceTruth, DeviceError> {
    let path = dir.join(TRUTH_FILE);
    let text = std::fs::read_to_string(&path).map_err(|source| DeviceError::TruthIo {
        path: path.clone(),
        source,
    })?;
    let truth: DeviceTruth =
        serde_json::from_str(&text).map_err(|source| DeviceError::TruthMalformed {
            path: path.clone(),
            source,
        })?;
    truth.validate()?;
    Ok(truth)
}

/// Write `truth.json` beside `platform.json`, canonically formatted.
pub fn save_truth(truth: &DeviceTruth, dir: &Path) -> Result<(), DeviceError> {
    truth.validate()?;
    std::fs::create_dir_all(dir).map_err(|source| DeviceError::TruthIo {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut value = serde_json::to_value(truth).expect("truth serializes");
    canon::canonicalize(&mut value);
    let path = dir.join(TRUTH_FILE);
    std::fs::write(&path, canon::to_canonical_string(&value))
        .map_err(|source| DeviceError::TruthIo { path, source })
}
