//! A built-in two-qubit platform with matching ground truth.
//!
//! The demo platform ships calibrated at the truth values, so perturbing a
//! copy of the config and recalibrating against the virtual device is the
//! standard way to exercise the framework end to end.

use std::path::Path;

use crate::device::{save_truth, DeviceError, DeviceTruth, NoiseModel, PairTruth, QubitTruth};
use crate::platform::{
    canon, pair_key, save_platform, ClassifierParams, PairCalibration, PlatformConfig,
    PlatformError, QubitCalibration, QubitId,
};

pub const DEMO_PLATFORM_NAME: &str = "demo";

fn canon_pi() -> f64 {
    canon::canon_f64(std::f64::consts::PI)
}

pub fn demo_truth() -> DeviceTruth {
    let q0 = QubitTruth {
        f_r_bare_hz: 7.2550e9,
        f_r_dressed_hz: 7.2500e9,
        chi_hz: 0.15e6,
        resonator_linewidth_hz: 1.0e6,
        punchout_amplitude: 0.4,
        f_q_max_hz: 5.0e9,
        v_sweetspot: 0.1,
        v_period: 0.8,
        a_pi_true: 0.5,
        pi_duration_ref_ns: 40.0,
        drag_beta_opt: 0.12,
        drive_linewidth_hz: 1.5e6,
        t1_ns: 10_000.0,
        t2_ns: 5_000.0,
        t1_detuning_slope_ns_per_hz: 0.0,
        t2_detuning_slope_per_hz: 0.0,
        iq_sigma: 0.05,
        readout_gain: 0.25,
    };
    let q1 = QubitTruth {
        f_r_bare_hz: 7.3550e9,
        f_r_dressed_hz: 7.3500e9,
        chi_hz: 0.15e6,
        resonator_linewidth_hz: 1.0e6,
        punchout_amplitude: 0.4,
        f_q_max_hz: 4.85e9,
        v_sweetspot: -0.05,
        v_period: 0.9,
        a_pi_true: 0.42,
        pi_duration_ref_ns: 40.0,
        drag_beta_opt: 0.085,
        drive_linewidth_hz: 1.5e6,
        t1_ns: 12_000.0,
        t2_ns: 6_000.0,
        t1_detuning_slope_ns_per_hz: 0.0,
        t2_detuning_slope_per_hz: 0.0,
        iq_sigma: 0.05,
        readout_gain: 0.25,
    };
    let pair = PairTruth {
        g_hz: 8.0e6,
        a_resonance: 0.35,
        detuning_slope_hz_per_unit: 6.0e8,
        phi_a_rad: 0.4,
        phi_b_rad: -0.7,
        phi_cond_rad: canon_pi(),
    };
    DeviceTruth {
        qubits: [
            (QubitId::new("q0"), q0),
            (QubitId::new("q1"), q1),
        ]
        .into(),
        pairs: [("q0-q1".to_string(), pair)].into(),
        noise: NoiseModel {
            seed: 2024,
            shot_sampling: true,
        },
    }
}

/// The classifier geometry the demo readout produces at the optimal readout
/// frequency: states separate along Q, so the rotation is -pi/2.
fn demo_classifier() -> ClassifierParams {
    ClassifierParams {
        angle_rad: canon::canon_f64(-std::f64::consts::FRAC_PI_2),
        threshold: 0.0,
        assignment_fidelity: 0.915,
    }
}

pub fn demo_platform() -> PlatformConfig {
    let q0 = QubitId::new("q0");
    let q1 = QubitId::new("q1");
    let cal0 = QubitCalibration {
        readout_frequency_hz: 7.2500e9,
        readout_amplitude: 0.25,
        drive_frequency_hz: 5.0e9,
        pi_pulse_amplitude: 0.5,
        pi_pulse_duration_ns: 40.0,
        drag_beta: 0.12,
        sweetspot_v: 0.1,
        flux_bias_v: 0.1,
        t1_ns: Some(10_000.0),
        t2_ramsey_ns: Some(5_000.0),
        t2_echo_ns: Some(7_500.0),
        readout_fidelity: Some(0.915),
        classifier: Some(demo_classifier()),
    };
    let cal1 = QubitCalibration {
        readout_frequency_hz: 7.3500e9,
        readout_amplitude: 0.25,
        drive_frequency_hz: 4.85e9,
        pi_pulse_amplitude: 0.42,
        pi_pulse_duration_ns: 40.0,
        drag_beta: 0.085,
        sweetspot_v: -0.05,
        flux_bias_v: -0.05,
        t1_ns: Some(12_000.0),
        t2_ramsey_ns: Some(6_000.0),
        t2_echo_ns: Some(9_000.0),
        readout_fidelity: Some(0.915),
        classifier: Some(demo_classifier()),
    };
    let pair = PairCalibration {
        qubit_a: q0.clone(),
        qubit_b: q1.clone(),
        coupling_hz: 8.0e6,
        cz_flux_amplitude: 0.35,
        cz_duration_ns: 31.25,
        conditional_phase_rad: canon_pi(),
        virtual_phase_rad: [(q0.clone(), -0.4), (q1.clone(), 0.7)].into(),
    };
    PlatformConfig {
        name: DEMO_PLATFORM_NAME.into(),
        qubits: [(q0, cal0), (q1, cal1)].into(),
        pairs: [(pair_key(&pair.qubit_a, &pair.qubit_b), pair)].into(),
    }
}

/// Write the demo platform directory: `platform.json` plus `truth.json`.
pub fn write_demo_platform(dir: &Path) -> Result<(), PlatformError> {
    save_platform(&demo_platform(), dir)?;
    save_demo_truth(&demo_truth(), dir).map_err(|e| PlatformError::Io {
        path: dir.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

fn save_demo_truth(truth: &DeviceTruth, dir: &Path) -> Result<(), DeviceError> {
    save_truth(truth, dir)
}

/// Strip all stochastic behavior: no IQ noise, closed-form probabilities.
pub fn make_noiseless(truth: &mut DeviceTruth) {
    for qt in truth.qubits.values_mut() {
        qt.iq_sigma = 0.0;
    }
    truth.noise.shot_sampling = false;
}
