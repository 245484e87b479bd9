use super::*;
use crate::demo::{demo_platform, demo_truth, make_noiseless};
use crate::device::{Device, NamedArray};
use serde_json::json;

fn noiseless_device() -> Device {
    let mut truth = demo_truth();
    make_noiseless(&mut truth);
    Device::new(truth).unwrap()
}

fn noisy_device(seed: u64) -> Device {
    let mut truth = demo_truth();
    truth.noise.seed = seed;
    Device::new(truth).unwrap()
}

fn run(
    name: &str,
    config: &PlatformConfig,
    device: &mut Device,
    params: serde_json::Value,
) -> RoutineOutcome {
    let routine = lookup(name).unwrap();
    let targets = vec!["q0".to_string()];
    run_routine(routine, config, &targets, &params, device).unwrap()
}

fn run_pair(
    name: &str,
    config: &PlatformConfig,
    device: &mut Device,
    params: serde_json::Value,
) -> RoutineOutcome {
    let routine = lookup(name).unwrap();
    let targets = vec!["q0-q1".to_string()];
    run_routine(routine, config, &targets, &params, device).unwrap()
}

fn q0_result(outcome: &RoutineOutcome, key: &str) -> f64 {
    outcome.results.per_target["q0"].value(key).unwrap()
}

// --------------------------------------------------------------- resonator

#[test]
fn resonator_spectroscopy_recovers_offset_dip() {
    let mut config = demo_platform();
    // Truth dip for |0> sits at f_r_dressed + chi; detune the config 40 kHz.
    let truth_dip = 7.25e9 + 0.15e6;
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .readout_frequency_hz = truth_dip - 40.0e3;
    let mut device = noiseless_device();
    let outcome = run("resonator_spectroscopy", &config, &mut device, json!({}));
    let fitted = q0_result(&outcome, "readout_frequency_hz");
    assert!(
        (fitted - truth_dip).abs() < 1.0e3,
        "fitted {fitted}, truth {truth_dip}"
    );
    assert_eq!(outcome.updates.len(), 1);
    assert_eq!(outcome.updates[0].path, "qubits.q0.readout_frequency_hz");
}

#[test]
fn resonator_spectroscopy_is_a_fixed_point_when_exact() {
    let mut config = demo_platform();
    let truth_dip = 7.25e9 + 0.15e6;
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .readout_frequency_hz = truth_dip;
    let mut device = noiseless_device();
    let step = 0.1e6;
    let outcome = run("resonator_spectroscopy", &config, &mut device, json!({}));
    let fitted = q0_result(&outcome, "readout_frequency_hz");
    assert!((fitted - truth_dip).abs() < step);
}

#[test]
fn resonator_spectroscopy_fails_on_flat_signal() {
    let routine = lookup("resonator_spectroscopy").unwrap();
    let mut data = Data::new("resonator_spectroscopy", json!({}));
    let mut set = crate::device::ArraySet::new();
    let n = 61;
    set.insert(
        "frequency_hz",
        NamedArray::f64(vec![n], (0..n).map(|i| 7.0e9 + i as f64 * 1e5).collect()),
    );
    set.insert(
        "signal",
        NamedArray::c64(
            vec![n],
            vec![num_complex::Complex64::new(0.0625, 0.0); n],
        ),
    );
    data.per_target.insert("q0".into(), set);
    let results = routine.fit(&data);
    assert_eq!(results.per_target["q0"].quality, FitQuality::Failed);
    assert!(routine.update(&results, &demo_platform()).is_empty());
}

#[test]
fn punchout_detects_threshold_within_one_step() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run("resonator_punchout", &config, &mut device, json!({}));
    let tr = &outcome.results.per_target["q0"];
    assert_eq!(tr.quality, FitQuality::Good);
    let threshold = tr.value("punchout_amplitude").unwrap();
    assert!((threshold - 0.4).abs() <= 0.05, "threshold {threshold}");
    let f_bare = tr.value("f_bare_hz").unwrap();
    assert!((f_bare - 7.2550e9).abs() < 0.3e6, "f_bare {f_bare}");
    let f_dressed = tr.value("f_dressed_hz").unwrap();
    assert!((f_dressed - (7.25e9 + 0.15e6)).abs() < 0.3e6);
    // Amplitude update is half the detected threshold.
    assert!(outcome
        .updates
        .iter()
        .any(|u| u.path == "qubits.q0.readout_amplitude"));
}

#[test]
fn punchout_below_threshold_flags_poor_and_updates_frequency_only() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "resonator_punchout",
        &config,
        &mut device,
        json!({"amplitude_min": 0.02, "amplitude_max": 0.3, "amplitude_step": 0.02}),
    );
    let tr = &outcome.results.per_target["q0"];
    assert_eq!(tr.quality, FitQuality::Poor);
    assert!(tr.value("punchout_amplitude").is_none());
    assert_eq!(outcome.updates.len(), 1);
    assert_eq!(outcome.updates[0].path, "qubits.q0.readout_frequency_hz");
}

// ------------------------------------------------------------------ qubit

#[test]
fn qubit_spectroscopy_recovers_detuned_frequency() {
    let mut config = demo_platform();
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .drive_frequency_hz = 5.0e9 - 2.0e6;
    let mut device = noiseless_device();
    let outcome = run("qubit_spectroscopy", &config, &mut device, json!({}));
    let fitted = q0_result(&outcome, "drive_frequency_hz");
    assert!((fitted - 5.0e9).abs() < 10.0e3, "fitted {fitted}");
}

#[test]
fn qubit_spectroscopy_flags_edge_peak_as_poor() {
    let mut config = demo_platform();
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .drive_frequency_hz = 5.0e9 - 6.0e6;
    let mut device = noiseless_device();
    let outcome = run(
        "qubit_spectroscopy",
        &config,
        &mut device,
        json!({"freq_width_hz": 1.0e7}),
    );
    assert_eq!(outcome.results.per_target["q0"].quality, FitQuality::Poor);
}

#[test]
fn flux_dependence_recovers_flux_model() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "qubit_flux_dependence",
        &config,
        &mut device,
        json!({"bias_step_v": 0.006}),
    );
    let tr = &outcome.results.per_target["q0"];
    assert_eq!(tr.quality, FitQuality::Good);
    let f_max = tr.value("f_q_max_hz").unwrap();
    let v_ss = tr.value("sweetspot_v").unwrap();
    let v_p = tr.value("v_period_v").unwrap();
    assert!(((f_max - 5.0e9) / 5.0e9).abs() < 1e-3, "f_max {f_max}");
    assert!((v_ss - 0.1).abs() < 0.006, "v_ss {v_ss}");
    assert!(((v_p - 0.8) / 0.8).abs() < 1e-2, "v_p {v_p}");
}

#[test]
fn flux_dependence_requires_five_biases() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let routine = lookup("qubit_flux_dependence").unwrap();
    let err = routine
        .acquire(
            &config,
            &["q0".to_string()],
            &json!({"bias_min_v": -0.01, "bias_max_v": 0.01, "bias_step_v": 0.01}),
            &mut device,
        )
        .unwrap_err();
    assert!(matches!(err, ProtocolError::Precondition(_)));
}

#[test]
fn readout_frequency_optimization_finds_midpoint() {
    let mut config = demo_platform();
    // Start detuned so the argmax is informative.
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .readout_frequency_hz = 7.25e9 + 0.4e6;
    let mut device = noiseless_device();
    let outcome = run(
        "readout_frequency_optimization",
        &config,
        &mut device,
        json!({}),
    );
    let best = q0_result(&outcome, "readout_frequency_hz");
    assert!((best - 7.25e9).abs() <= 0.05e6, "best {best}");
}

#[test]
fn readout_frequency_optimization_flags_zero_separation() {
    // A vanishing dispersive shift leaves the two states identical.
    let mut truth = demo_truth();
    make_noiseless(&mut truth);
    truth.qubits.get_mut(&QubitId::new("q0")).unwrap().chi_hz = 1.0;
    let mut device = Device::new(truth).unwrap();
    let config = demo_platform();
    let outcome = run(
        "readout_frequency_optimization",
        &config,
        &mut device,
        json!({}),
    );
    assert_eq!(outcome.results.per_target["q0"].quality, FitQuality::Poor);
}

#[test]
fn readout_separation_curve_is_symmetric() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "readout_frequency_optimization",
        &config,
        &mut device,
        json!({}),
    );
    let set = &outcome.data.per_target["q0"];
    let s0 = set.array("signal_state0").unwrap().as_c64().unwrap();
    let s1 = set.array("signal_state1").unwrap().as_c64().unwrap();
    let sep: Vec<f64> = s0.iter().zip(s1).map(|(a, b)| (b - a).norm()).collect();
    let n = sep.len();
    for k in 0..n / 2 {
        let dev = (sep[k] - sep[n - 1 - k]).abs();
        assert!(dev < 1e-9, "asymmetry {dev} at offset {k}");
    }
}

// ------------------------------------------------------------------- rabi

#[test]
fn rabi_amplitude_recovers_pi_amplitude() {
    let mut config = demo_platform();
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .pi_pulse_amplitude = 0.45;
    let mut device = noiseless_device();
    let outcome = run("rabi", &config, &mut device, json!({}));
    let fitted = q0_result(&outcome, "pi_pulse_amplitude");
    assert!(((fitted - 0.5) / 0.5).abs() < 0.01, "fitted {fitted}");
}

#[test]
fn rabi_short_span_is_poor_without_update() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "rabi",
        &config,
        &mut device,
        json!({"sweep_max": 0.3, "sweep_step": 0.01}),
    );
    let tr = &outcome.results.per_target["q0"];
    assert_eq!(tr.quality, FitQuality::Poor);
    assert!(outcome.updates.is_empty());
}

#[test]
fn rabi_duration_mode_updates_duration() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "rabi",
        &config,
        &mut device,
        json!({"mode": "duration", "sweep_min": 2.0, "sweep_max": 120.0, "sweep_step": 2.0}),
    );
    let fitted = q0_result(&outcome, "pi_pulse_duration_ns");
    // Config amplitude equals a_pi_true, so the pi duration is the 40 ns
    // truth reference.
    assert!(((fitted - 40.0) / 40.0).abs() < 0.01, "fitted {fitted}");
    assert!(outcome
        .updates
        .iter()
        .any(|u| u.path == "qubits.q0.pi_pulse_duration_ns"));
}

#[test]
fn rabi_probability_at_fitted_pi_amplitude_is_high() {
    let mut config = demo_platform();
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .pi_pulse_amplitude = 0.45;
    let mut device = noiseless_device();
    let outcome = run("rabi", &config, &mut device, json!({}));
    let fitted = q0_result(&outcome, "pi_pulse_amplitude");
    let set = device
        .simulate(&crate::device::ExperimentSpec::RabiAmplitude {
            qubit: QubitId::new("q0"),
            amplitudes: vec![fitted],
            drive_frequency_hz: 5.0e9,
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        })
        .unwrap();
    let p = set.array("probability").unwrap().as_f64().unwrap()[0];
    assert!(p >= 0.99, "P(1) at fitted pi amplitude: {p}");
}

// --------------------------------------------------------------- flipping

#[test]
fn flipping_recovers_injected_amplitude_errors() {
    for epsilon in [0.01f64, 0.02, 0.05, -0.01, -0.02, -0.05] {
        let mut config = demo_platform();
        config
            .qubits
            .get_mut(&QubitId::new("q0"))
            .unwrap()
            .pi_pulse_amplitude = 0.5 * (1.0 + epsilon);
        let mut device = noiseless_device();
        let outcome = run("flipping", &config, &mut device, json!({}));
        let fitted = q0_result(&outcome, "epsilon");
        assert!(
            ((fitted - epsilon) / epsilon).abs() < 0.05,
            "epsilon {epsilon}: fitted {fitted}"
        );
    }
}

#[test]
fn flipping_zero_error_is_flat_and_good() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run("flipping", &config, &mut device, json!({}));
    let tr = &outcome.results.per_target["q0"];
    assert_eq!(tr.quality, FitQuality::Good);
    assert_eq!(tr.value("epsilon").unwrap(), 0.0);
    assert_eq!(tr.value("pi_pulse_amplitude").unwrap(), 0.5);
}

#[test]
fn flipping_negative_error_increases_amplitude() {
    let mut config = demo_platform();
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .pi_pulse_amplitude = 0.5 * (1.0 - 0.02);
    let mut device = noiseless_device();
    let outcome = run("flipping", &config, &mut device, json!({}));
    let corrected = q0_result(&outcome, "pi_pulse_amplitude");
    assert!(corrected > 0.5 * 0.98, "corrected {corrected}");
    assert!((corrected - 0.5).abs() < 0.002);
}

// ----------------------------------------------------------------- ramsey

#[test]
fn ramsey_corrects_drive_frequency() {
    let mut config = demo_platform();
    config
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .drive_frequency_hz = 5.0e9 - 0.3e6;
    let mut device = noiseless_device();
    let outcome = run("ramsey", &config, &mut device, json!({}));
    let corrected = q0_result(&outcome, "drive_frequency_hz");
    assert!((corrected - 5.0e9).abs() < 5.0e3, "corrected {corrected}");
}

#[test]
fn ramsey_on_resonance_fits_the_artificial_detuning() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run("ramsey", &config, &mut device, json!({}));
    let f_fit = q0_result(&outcome, "fitted_frequency_hz");
    // One DFT bin at the default sweep is 1/(3000 ns) = 333 kHz.
    assert!((f_fit - 2.0e6).abs() < 0.35e6, "f_fit {f_fit}");
    let corrected = q0_result(&outcome, "drive_frequency_hz");
    assert!((corrected - 5.0e9).abs() < 5.0e3);
}

#[test]
fn ramsey_recovers_t2_under_binomial_noise() {
    let config = demo_platform();
    let mut device = noisy_device(11);
    let outcome = run("ramsey", &config, &mut device, json!({"nshots": 4096}));
    let t2 = q0_result(&outcome, "t2_ramsey_ns");
    assert!(((t2 - 5_000.0) / 5_000.0).abs() < 0.15, "t2 {t2}");
}

#[test]
fn ramsey_requires_positive_artificial_detuning() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let routine = lookup("ramsey").unwrap();
    let err = routine
        .acquire(
            &config,
            &["q0".to_string()],
            &json!({"artificial_detuning_hz": 0.0}),
            &mut device,
        )
        .unwrap_err();
    assert!(matches!(err, ProtocolError::Precondition(_)));
}

// -------------------------------------------------------------- coherence

#[test]
fn t1_fit_is_exact_on_noiseless_decay() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "coherence_decay",
        &config,
        &mut device,
        json!({"delay_max_ns": 50_100.0}),
    );
    let t1 = q0_result(&outcome, "t1_ns");
    assert!(((t1 - 10_000.0) / 10_000.0).abs() < 1e-3, "t1 {t1}");
}

#[test]
fn short_decay_window_is_poor() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "coherence_decay",
        &config,
        &mut device,
        json!({"delay_min_ns": 10.0, "delay_max_ns": 1_010.0, "delay_step_ns": 20.0}),
    );
    assert_eq!(outcome.results.per_target["q0"].quality, FitQuality::Poor);
}

#[test]
fn echo_exceeds_ramsey_t2_on_default_truth() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let echo = run(
        "coherence_decay",
        &config,
        &mut device,
        json!({"kind": "echo", "delay_max_ns": 30_100.0}),
    );
    let t2e = q0_result(&echo, "t2_echo_ns");
    let mut device = noiseless_device();
    let ramsey = run("ramsey", &config, &mut device, json!({}));
    let t2r = q0_result(&ramsey, "t2_ramsey_ns");
    assert!(t2e > t2r, "echo {t2e} vs ramsey {t2r}");
}

// ----------------------------------------------------------- classification

#[test]
fn classification_with_vanishing_noise_is_perfect() {
    let mut truth = demo_truth();
    for qt in truth.qubits.values_mut() {
        qt.iq_sigma = 1e-9;
    }
    let mut device = Device::new(truth).unwrap();
    let config = demo_platform();
    let outcome = run(
        "single_shot_classification",
        &config,
        &mut device,
        json!({"nshots": 500}),
    );
    let fidelity = q0_result(&outcome, "assignment_fidelity");
    assert_eq!(fidelity, 1.0);
}

#[test]
fn classification_matches_gaussian_overlap() {
    // Demo geometry: separation 2 gain |Im s21(chi)| with per-axis sigma.
    let config = demo_platform();
    let mut device = noisy_device(5);
    let outcome = run("single_shot_classification", &config, &mut device, json!({}));
    let fidelity = q0_result(&outcome, "assignment_fidelity");
    let half_kappa = 0.5e6;
    let chi = 0.15e6;
    let d = 2.0 * 0.25 * half_kappa * chi / (half_kappa * half_kappa + chi * chi);
    let expected = 0.5 * (1.0 + erf(d / (2.0 * 0.05) / std::f64::consts::SQRT_2));
    assert!(
        (fidelity - expected).abs() < 0.02,
        "fidelity {fidelity}, expected {expected}"
    );
    assert!(outcome
        .updates
        .iter()
        .any(|u| u.path == "qubits.q0.classifier"));
    assert!(outcome
        .updates
        .iter()
        .any(|u| u.path == "qubits.q0.readout_fidelity"));
}

#[test]
fn classification_is_deterministic_per_seed() {
    let config = demo_platform();
    let mut dev_a = noisy_device(17);
    let mut dev_b = noisy_device(17);
    let a = run("single_shot_classification", &config, &mut dev_a, json!({}));
    let b = run("single_shot_classification", &config, &mut dev_b, json!({}));
    assert_eq!(a.results, b.results);
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

// ------------------------------------------------------------------- drag

#[test]
fn drag_tuning_finds_vertex() {
    let mut config = demo_platform();
    config.qubits.get_mut(&QubitId::new("q0")).unwrap().drag_beta = 0.0;
    let mut device = noiseless_device();
    let outcome = run("drag_tuning", &config, &mut device, json!({}));
    let beta = q0_result(&outcome, "drag_beta");
    assert!((beta - 0.12).abs() < 1e-3, "beta {beta}");
}

#[test]
fn drag_vertex_outside_range_is_poor_without_update() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run(
        "drag_tuning",
        &config,
        &mut device,
        json!({"beta_min": 0.2, "beta_max": 0.5}),
    );
    let tr = &outcome.results.per_target["q0"];
    assert_eq!(tr.quality, FitQuality::Poor);
    assert!(outcome.updates.is_empty());
}

#[test]
fn drag_symmetric_sweep_is_tight() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let step = 0.01;
    let outcome = run(
        "drag_tuning",
        &config,
        &mut device,
        json!({"beta_min": 0.12 - 0.1, "beta_max": 0.12 + 0.1, "beta_step": step}),
    );
    let beta = q0_result(&outcome, "drag_beta");
    assert!((beta - 0.12).abs() < step / 10.0, "beta {beta}");
}

// --------------------------------------------------------------------- rb

#[test]
fn rb_on_ideal_device_is_degenerate_at_one() {
    let mut truth = demo_truth();
    make_noiseless(&mut truth);
    for qt in truth.qubits.values_mut() {
        qt.t1_ns = f64::INFINITY;
        qt.t2_ns = f64::INFINITY;
    }
    let mut device = Device::new(truth).unwrap();
    let config = demo_platform();
    let outcome = run("standard_rb", &config, &mut device, json!({}));
    let tr = &outcome.results.per_target["q0"];
    assert_eq!(tr.value("decay_p").unwrap(), 1.0);
    let a_plus_b = tr.value("amplitude").unwrap() + tr.value("baseline").unwrap();
    assert!((a_plus_b - 1.0).abs() < 1e-9);
    assert!(outcome.updates.is_empty());
}

#[test]
fn rb_amplitude_error_lowers_decay() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let baseline = run("standard_rb", &config, &mut device, json!({}));
    let p_good = q0_result(&baseline, "decay_p");

    let mut miscal = demo_platform();
    miscal
        .qubits
        .get_mut(&QubitId::new("q0"))
        .unwrap()
        .pi_pulse_amplitude = 0.5 * 1.05;
    let mut device = noiseless_device();
    let degraded = run("standard_rb", &miscal, &mut device, json!({}));
    let p_bad = q0_result(&degraded, "decay_p");
    assert!(
        p_bad < p_good,
        "5% amplitude error must lower p: {p_bad} vs {p_good}"
    );
}

// ---------------------------------------------------------------- two-qubit

#[test]
fn avoided_crossing_recovers_coupling() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run_pair("avoided_crossing", &config, &mut device, json!({}));
    let tr = &outcome.results.per_target["q0-q1"];
    assert_eq!(tr.quality, FitQuality::Good, "{:?}", tr.message);
    let g = tr.value("coupling_hz").unwrap();
    assert!(((g - 8.0e6) / 8.0e6).abs() < 0.05, "g {g}");
    // Grid resolution of the raw minimum gap: the crossing can sit half a
    // bias step from the nearest sample, detuning the branches by
    // slope * step / 2 (about 6.8 MHz here).
    let min_gap = tr.value("min_gap_hz").unwrap();
    let half_step_detuning: f64 = 3.42e9 * 0.004 / 2.0;
    let worst = ((16.0e6f64).powi(2) + half_step_detuning.powi(2)).sqrt() - 16.0e6;
    assert!(
        min_gap >= 16.0e6 - 0.2e6 && min_gap <= 16.0e6 + worst + 0.2e6,
        "min gap {min_gap}"
    );
}

#[test]
fn avoided_crossing_without_crossing_is_poor() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run_pair(
        "avoided_crossing",
        &config,
        &mut device,
        json!({"bias_min_v": 0.0, "bias_max_v": 0.04, "bias_step_v": 0.004}),
    );
    assert_eq!(
        outcome.results.per_target["q0-q1"].quality,
        FitQuality::Poor
    );
}

#[test]
fn chevron_locates_apex_and_full_exchange() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run_pair("chevron", &config, &mut device, json!({}));
    let tr = &outcome.results.per_target["q0-q1"];
    assert_eq!(tr.quality, FitQuality::Good, "{:?}", tr.message);
    let a_star = tr.value("cz_flux_amplitude").unwrap();
    assert!((a_star - 0.35).abs() <= 0.01, "apex {a_star}");
    let g = tr.value("coupling_hz").unwrap();
    assert!(((g - 8.0e6) / 8.0e6).abs() < 0.05, "g {g}");

    // At the resonance amplitude, the fitted duration is a full exchange.
    let t_star = tr.value("cz_duration_ns").unwrap();
    let set = device
        .simulate(&crate::device::ExperimentSpec::Chevron {
            pair: "q0-q1".into(),
            amplitudes: vec![0.35],
            durations_ns: vec![t_star],
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        })
        .unwrap();
    let p = set.array("probability").unwrap().as_f64().unwrap()[0];
    assert!((p - 1.0).abs() < 1e-6, "P at t* = {p}");
}

#[test]
fn cz_phase_recovers_conditional_phase() {
    let config = demo_platform();
    let mut device = noiseless_device();
    let outcome = run_pair("cz_virtual_phase", &config, &mut device, json!({}));
    let tr = &outcome.results.per_target["q0-q1"];
    assert_eq!(tr.quality, FitQuality::Good, "{:?}", tr.message);
    let cond = tr.value("conditional_phase_rad").unwrap();
    let dev = crate::numerics::wrap_phase(cond - std::f64::consts::PI).abs();
    assert!(dev < 0.02, "conditional phase {cond}");
    let virt = tr.value("virtual_phase_rad").unwrap();
    assert!((virt - (-0.4)).abs() < 0.02, "virtual {virt}");
}

#[test]
fn cz_phase_zero_single_qubit_phase_means_zero_correction() {
    let mut truth = demo_truth();
    make_noiseless(&mut truth);
    truth.pairs.get_mut("q0-q1").unwrap().phi_a_rad = 0.0;
    let mut device = Device::new(truth).unwrap();
    let config = demo_platform();
    let outcome = run_pair("cz_virtual_phase", &config, &mut device, json!({}));
    let virt = outcome.results.per_target["q0-q1"]
        .value("virtual_phase_rad")
        .unwrap();
    assert!(virt.abs() < 0.02, "virtual {virt}");
}

#[test]
fn phase_wrap_convention() {
    // phi0 = 3.0, phi1 = -3.0: the difference wraps into (-pi, pi].
    let wrapped = crate::numerics::wrap_phase(-3.0 - 3.0);
    assert!((wrapped - (std::f64::consts::TAU - 6.0)).abs() < 1e-12);
    assert!(wrapped > -std::f64::consts::PI && wrapped <= std::f64::consts::PI);
}

// ----------------------------------------------------------- shared contracts

fn quick_params(name: &str) -> serde_json::Value {
    match name {
        "resonator_spectroscopy" => json!({"nshots": 64}),
        "resonator_punchout" => {
            json!({"nshots": 64, "amplitude_step": 0.15, "freq_step_hz": 1.0e6})
        }
        "qubit_spectroscopy" => json!({"nshots": 64, "freq_step_hz": 0.5e6}),
        "qubit_flux_dependence" => {
            json!({"nshots": 64, "freq_step_hz": 4.0e6, "bias_step_v": 0.012})
        }
        "readout_frequency_optimization" => json!({"nshots": 64, "freq_step_hz": 0.2e6}),
        "rabi" => json!({"nshots": 32, "sweep_step": 0.05}),
        "flipping" => json!({"nshots": 32, "n_flips_max": 20}),
        "drag_tuning" => json!({"nshots": 32, "beta_step": 0.05}),
        "ramsey" => json!({"nshots": 32, "delay_step_ns": 100.0}),
        "coherence_decay" => json!({"nshots": 32, "delay_step_ns": 2000.0}),
        "single_shot_classification" => json!({"nshots": 128}),
        "standard_rb" => json!({"nshots": 32, "depths": [1, 10, 30], "sequences_per_depth": 2}),
        "avoided_crossing" => json!({"nshots": 32, "freq_step_hz": 2.0e6, "bias_step_v": 0.01}),
        "chevron" => json!({"nshots": 32, "amplitude_step": 0.04, "duration_step_ns": 8.0}),
        "cz_virtual_phase" => json!({"nshots": 32, "phase_points": 15}),
        other => panic!("unknown protocol {other}"),
    }
}

#[test]
fn acquire_fit_separability_for_every_protocol() {
    let config = demo_platform();
    for (name, routine) in registry() {
        let params = quick_params(name);
        let targets = match routine.target_kind() {
            TargetKind::Qubit => vec!["q0".to_string()],
            TargetKind::Pair => vec!["q0-q1".to_string()],
        };
        let mut device = noisy_device(31);
        let mut data = routine
            .acquire(&config, &targets, &params, &mut device)
            .unwrap_or_else(|e| panic!("{name} acquire failed: {e}"));
        data.canonicalize();
        let direct = routine.fit(&data);

        let dir = tempfile::tempdir().unwrap();
        data.save_into(dir.path()).unwrap();
        let reloaded = Data::load_from(dir.path(), &data.timestamp).unwrap();
        let refit = routine.fit(&reloaded);
        assert_eq!(direct, refit, "{name}: fit differs after save/load");
    }
}

#[test]
fn no_protocol_updates_on_injected_nan_data() {
    let config = demo_platform();
    for (name, routine) in registry() {
        let target = match routine.target_kind() {
            TargetKind::Qubit => "q0",
            TargetKind::Pair => "q0-q1",
        };
        let mut data = Data::new(name, routine.default_params());
        let mut set = crate::device::ArraySet::new();
        let n = 16;
        let nan = vec![f64::NAN; n];
        for axis in [
            "frequency_hz",
            "amplitude",
            "duration_ns",
            "delay_ns",
            "n_flips",
            "beta",
            "depth",
            "phase_rad",
            "bias_v",
        ] {
            set.insert(axis, NamedArray::f64(vec![n], nan.clone()));
        }
        set.insert("probability", NamedArray::f64(vec![n], nan.clone()));
        set.insert(
            "signal",
            NamedArray::c64(vec![n], vec![num_complex::Complex64::new(f64::NAN, 0.0); n]),
        );
        data.per_target.insert(target.to_string(), set);
        let results = routine.fit(&data);
        for tr in results.per_target.values() {
            assert_eq!(
                tr.quality,
                FitQuality::Failed,
                "{name} did not fail on NaN data"
            );
        }
        assert!(
            routine.update(&results, &config).is_empty(),
            "{name} produced updates from failed fits"
        );
    }
}

#[test]
fn updates_touch_only_owned_fields() {
    let config = demo_platform();
    for (name, routine) in registry() {
        let targets = match routine.target_kind() {
            TargetKind::Qubit => vec!["q0".to_string()],
            TargetKind::Pair => vec!["q0-q1".to_string()],
        };
        let mut device = noiseless_device();
        let outcome =
            match run_routine(routine.as_ref(), &config, &targets, &json!({}), &mut device) {
                Ok(outcome) => outcome,
                Err(e) => panic!("{name}: {e}"),
            };
        for update in &outcome.updates {
            let owned = routine.owned_fields().iter().any(|field| {
                update.path.ends_with(field) || update.path.contains(&format!(".{field}."))
            });
            assert!(owned, "{name} updated unowned path {}", update.path);
        }
    }
}

#[test]
fn closed_loop_iteration_contracts_errors() {
    let mut config = demo_platform();
    {
        let q = config.qubits.get_mut(&QubitId::new("q0")).unwrap();
        q.drive_frequency_hz = 5.0e9 - 2.0e6;
        q.pi_pulse_amplitude = 0.56;
        q.classifier = None;
    }
    let mut device = noisy_device(23);
    let targets = vec!["q0".to_string()];
    let mut drive_errors = Vec::new();
    let mut amp_errors = Vec::new();
    for _ in 0..2 {
        for (op, params) in [
            ("qubit_spectroscopy", json!({})),
            ("rabi", json!({})),
            ("single_shot_classification", json!({"nshots": 4000})),
            ("ramsey", json!({"artificial_detuning_hz": 3.0e6})),
        ] {
            let routine = lookup(op).unwrap();
            let outcome = run_routine(routine, &config, &targets, &params, &mut device).unwrap();
            config = crate::platform::apply_update(&config, &outcome.updates).unwrap();
        }
        let cal = &config.qubits[&QubitId::new("q0")];
        drive_errors.push((cal.drive_frequency_hz - 5.0e9).abs());
        amp_errors.push((cal.pi_pulse_amplitude - 0.5).abs());
    }
    // Errors shrink monotonically until they hit the shot-noise floor of
    // the estimators; below the floor iterations may trade places.
    let drive_floor = 2.0e3;
    let amp_floor = 1.5e-3;
    assert!(
        drive_errors[1] < drive_errors[0].max(drive_floor),
        "drive error did not contract: {drive_errors:?}"
    );
    assert!(
        amp_errors[1] < amp_errors[0].max(amp_floor),
        "amplitude error did not contract: {amp_errors:?}"
    );
    assert!(drive_errors[0] < 5.0e4 && drive_errors[1] < 5.0e4);
    assert!(amp_errors[0] < 0.005 && amp_errors[1] < 0.005);
}
