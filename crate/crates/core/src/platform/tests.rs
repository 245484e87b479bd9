use super::*;
use proptest::prelude::*;
use serde_json::json;

fn qubit(drive_hz: f64) -> QubitCalibration {
    QubitCalibration {
        readout_frequency_hz: 7.25e9,
        readout_amplitude: 0.25,
        drive_frequency_hz: drive_hz,
        pi_pulse_amplitude: 0.5,
        pi_pulse_duration_ns: 40.0,
        drag_beta: 0.1,
        sweetspot_v: 0.1,
        flux_bias_v: 0.1,
        t1_ns: Some(10_000.0),
        t2_ramsey_ns: Some(5_000.0),
        t2_echo_ns: Some(7_500.0),
        readout_fidelity: None,
        classifier: Some(ClassifierParams {
            angle_rad: 0.3,
            threshold: 0.01,
            assignment_fidelity: 0.9,
        }),
    }
}

fn config() -> PlatformConfig {
    let q0 = QubitId::new("q0");
    let q1 = QubitId::new("q1");
    let pair = PairCalibration {
        qubit_a: q0.clone(),
        qubit_b: q1.clone(),
        coupling_hz: 8.0e6,
        cz_flux_amplitude: 0.35,
        cz_duration_ns: 31.0,
        conditional_phase_rad: canon::canon_f64(std::f64::consts::PI),
        virtual_phase_rad: [(q0.clone(), 0.0), (q1.clone(), 0.0)].into(),
    };
    PlatformConfig {
        name: "demo".into(),
        qubits: [(q0.clone(), qubit(5.0e9)), (q1, qubit(4.85e9))].into(),
        pairs: [(pair_key(&pair.qubit_a, &pair.qubit_b), pair)].into(),
    }
}

#[test]
fn load_minimal_single_qubit_platform() {
    let dir = tempfile::tempdir().unwrap();
    let doc = json!({
        "name": "one",
        "qubits": {"q0": serde_json::to_value(qubit(5.0e9)).unwrap()},
        "pairs": {}
    });
    std::fs::write(
        dir.path().join("platform.json"),
        serde_json::to_string(&doc).unwrap(),
    )
    .unwrap();
    let cfg = load_platform(dir.path()).unwrap();
    assert_eq!(cfg.qubits.len(), 1);
    assert!(cfg.pairs.is_empty());
}

#[test]
fn load_rejects_t2_exceeding_twice_t1() {
    let dir = tempfile::tempdir().unwrap();
    let mut q = qubit(5.0e9);
    q.t2_ramsey_ns = Some(3.0 * q.t1_ns.unwrap());
    q.t2_echo_ns = None;
    let doc = json!({"name": "bad", "qubits": {"q0": serde_json::to_value(q).unwrap()}, "pairs": {}});
    std::fs::write(
        dir.path().join("platform.json"),
        serde_json::to_string(&doc).unwrap(),
    )
    .unwrap();
    let err = load_platform(dir.path()).unwrap_err();
    match err {
        PlatformError::Invariant { field, .. } => {
            assert_eq!(field, "qubits.q0.t2_ramsey_ns");
        }
        other => panic!("expected invariant violation, got {other}"),
    }
}

#[test]
fn load_missing_file_reports_missing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_platform(dir.path()),
        Err(PlatformError::Missing(_))
    ));
}

#[test]
fn save_then_load_round_trips() {
    let cfg = config();
    let dir = tempfile::tempdir().unwrap();
    save_platform(&cfg, dir.path()).unwrap();
    let back = load_platform(dir.path()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn save_twice_is_byte_identical() {
    let cfg = config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    save_platform(&cfg, a.path()).unwrap();
    save_platform(&cfg, b.path()).unwrap();
    let bytes_a = std::fs::read(a.path().join("platform.json")).unwrap();
    let bytes_b = std::fs::read(b.path().join("platform.json")).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn save_empty_qubit_map_is_valid() {
    let cfg = PlatformConfig {
        name: "empty".into(),
        qubits: BTreeMap::new(),
        pairs: BTreeMap::new(),
    };
    let dir = tempfile::tempdir().unwrap();
    save_platform(&cfg, dir.path()).unwrap();
    assert_eq!(load_platform(dir.path()).unwrap(), cfg);
}

#[test]
fn diff_of_identical_configs_is_empty() {
    let cfg = config();
    assert!(diff_platforms(&cfg, &cfg).is_empty());
}

#[test]
fn diff_reports_single_changed_leaf() {
    let cfg = config();
    let mut other = cfg.clone();
    other.qubits.get_mut(&QubitId::new("q0")).unwrap().drive_frequency_hz += 1.0e6;
    let diffs = diff_platforms(&cfg, &other);
    assert_eq!(diffs.len(), 1);
    assert_eq!(diffs[0].path, "qubits.q0.drive_frequency_hz");
}

#[test]
fn diff_counts_two_changed_leaves() {
    let cfg = config();
    let mut other = cfg.clone();
    {
        let q = other.qubits.get_mut(&QubitId::new("q0")).unwrap();
        q.pi_pulse_amplitude = 0.55;
        q.drag_beta = 0.2;
    }
    let diffs = diff_platforms(&cfg, &other);
    assert_eq!(diffs.len(), 2);
    let paths: Vec<_> = diffs.iter().map(|d| d.path.as_str()).collect();
    assert!(paths.contains(&"qubits.q0.pi_pulse_amplitude"));
    assert!(paths.contains(&"qubits.q0.drag_beta"));
}

#[test]
fn apply_empty_update_is_identity() {
    let cfg = config();
    assert_eq!(apply_update(&cfg, &[]).unwrap(), cfg);
}

#[test]
fn apply_update_rejects_out_of_bounds_amplitude() {
    let cfg = config();
    let err = apply_update(
        &cfg,
        &[ConfigUpdate::new("qubits.q0.pi_pulse_amplitude", 1.5)],
    )
    .unwrap_err();
    assert!(matches!(err, PlatformError::Invariant { .. }));
    // Atomicity: the input is untouched by construction (pure function).
    assert_eq!(cfg.qubits[&QubitId::new("q0")].pi_pulse_amplitude, 0.5);
}

#[test]
fn apply_update_rejects_unknown_path() {
    let cfg = config();
    let err = apply_update(&cfg, &[ConfigUpdate::new("qubits.q7.drag_beta", 0.1)]).unwrap_err();
    assert!(matches!(err, PlatformError::UnknownPath(_)));
}

#[test]
fn apply_update_rejects_type_mismatch_with_path() {
    let cfg = config();
    let err = apply_update(&cfg, &[ConfigUpdate::new("qubits.q0.drag_beta", "fast")]).unwrap_err();
    match err {
        PlatformError::InvalidValue { path, .. } => assert_eq!(path, "qubits.q0.drag_beta"),
        other => panic!("expected InvalidValue, got {other}"),
    }
}

#[test]
fn apply_update_then_diff_recovers_exactly_the_update() {
    let cfg = config();
    let update = ConfigUpdate::new("qubits.q1.drive_frequency_hz", 4.9e9);
    let updated = apply_update(&cfg, std::slice::from_ref(&update)).unwrap();
    let diffs = diff_platforms(&cfg, &updated);
    assert_eq!(diffs.len(), 1);
    assert_eq!(diffs[0].path, update.path);
    assert_eq!(diffs[0].new, update.value);
}

#[test]
fn classifier_can_be_set_from_null() {
    let mut cfg = config();
    cfg.qubits.get_mut(&QubitId::new("q0")).unwrap().classifier = None;
    let value = serde_json::to_value(ClassifierParams {
        angle_rad: 0.1,
        threshold: 0.0,
        assignment_fidelity: 0.95,
    })
    .unwrap();
    let updated = apply_update(&cfg, &[ConfigUpdate::new("qubits.q0.classifier", value)]).unwrap();
    assert!(updated.qubits[&QubitId::new("q0")].classifier.is_some());
}

#[test]
fn pair_key_orders_lexicographically() {
    assert_eq!(pair_key(&QubitId::new("q1"), &QubitId::new("q0")), "q0-q1");
    assert_eq!(pair_key(&QubitId::new("q0"), &QubitId::new("q1")), "q0-q1");
}

#[test]
fn resolve_platform_dir_requires_env() {
    // Isolated variable name collisions are avoided by running serially in
    // this single test; the executor tests exercise the positive path.
    std::env::remove_var(PLATFORMS_ENV);
    assert!(matches!(
        resolve_platform_dir("demo"),
        Err(PlatformError::PlatformsEnvUnset)
    ));
}

fn canon_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo..hi).prop_map(canon::canon_f64)
}

prop_compose! {
    fn arb_qubit()(
        readout_frequency_hz in canon_range(1.0e9, 9.0e9),
        readout_amplitude in canon_range(0.01, 1.0),
        drive_frequency_hz in canon_range(1.0e9, 7.0e9),
        pi_pulse_amplitude in canon_range(0.01, 1.0),
        pi_pulse_duration_ns in canon_range(10.0, 100.0),
        drag_beta in canon_range(-1.0, 1.0),
        sweetspot_v in canon_range(-1.0, 1.0),
        flux_bias_v in canon_range(-1.0, 1.0),
        t1_ns in proptest::option::of(canon_range(1_000.0, 50_000.0)),
        ratio in canon_range(0.05, 1.9),
        with_t2 in any::<bool>(),
        readout_fidelity in proptest::option::of(canon_range(0.5, 1.0)),
    ) -> QubitCalibration {
        let t2 = match (t1_ns, with_t2) {
            (Some(t1), true) => Some(canon::canon_f64(t1 * ratio)),
            _ => None,
        };
        QubitCalibration {
            readout_frequency_hz,
            readout_amplitude,
            drive_frequency_hz,
            pi_pulse_amplitude,
            pi_pulse_duration_ns,
            drag_beta,
            sweetspot_v,
            flux_bias_v,
            t1_ns,
            t2_ramsey_ns: t2,
            t2_echo_ns: t2,
            readout_fidelity,
            classifier: None,
        }
    }
}

prop_compose! {
    fn arb_config()(
        qubits in proptest::collection::btree_map("q[0-9]", arb_qubit(), 1..4),
        name in "[a-z]{1,8}",
    ) -> PlatformConfig {
        let qubits: BTreeMap<QubitId, QubitCalibration> = qubits
            .into_iter()
            .map(|(label, cal)| (QubitId::new(label), cal))
            .collect();
        PlatformConfig { name, qubits, pairs: BTreeMap::new() }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn round_trip_is_identity(cfg in arb_config()) {
        let dir = tempfile::tempdir().unwrap();
        save_platform(&cfg, dir.path()).unwrap();
        let back = load_platform(dir.path()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn resave_is_byte_identical(cfg in arb_config()) {
        let dir = tempfile::tempdir().unwrap();
        save_platform(&cfg, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("platform.json")).unwrap();
        let back = load_platform(dir.path()).unwrap();
        save_platform(&back, dir.path()).unwrap();
        let second = std::fs::read(dir.path().join("platform.json")).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn diff_recovers_applied_updates(cfg in arb_config(), delta in canon_range(0.05, 0.4)) {
        let label = cfg.qubits.keys().next().unwrap().clone();
        let update = ConfigUpdate::new(
            format!("qubits.{label}.readout_amplitude"),
            canon::canon_f64(delta),
        );
        let old = cfg.qubits[&label].readout_amplitude;
        prop_assume!((old - delta).abs() > 1e-12);
        let updated = apply_update(&cfg, std::slice::from_ref(&update)).unwrap();
        let diffs = diff_platforms(&cfg, &updated);
        prop_assert_eq!(diffs.len(), 1);
        prop_assert_eq!(diffs[0].path.clone(), update.path);
        prop_assert_eq!(diffs[0].new.clone(), update.value);
    }
}
