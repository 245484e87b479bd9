use super::*;
use crate::demo::{demo_truth, make_noiseless};
use crate::numerics::oscillation_seed;

fn q0() -> QubitId {
    QubitId::new("q0")
}

fn noiseless_truth() -> DeviceTruth {
    let mut truth = demo_truth();
    make_noiseless(&mut truth);
    truth
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn probability(set: &ArraySet) -> &[f64] {
    set.array("probability").unwrap().as_f64().unwrap()
}

#[test]
fn default_truth_constructs_device() {
    let truth = demo_truth();
    assert_eq!(truth.qubits[&q0()].t1_ns, 10_000.0);
    assert!(Device::new(truth).is_ok());
}

#[test]
fn same_seed_and_call_sequence_is_bit_identical() {
    let mut truth = demo_truth();
    truth.noise.seed = 7;
    let spec = ExperimentSpec::Shots {
        qubit: q0(),
        prepared_state: 1,
        readout_frequency_hz: 7.25e9,
        nshots: 64,
    };
    let ramsey = ExperimentSpec::Ramsey {
        qubit: q0(),
        delays_ns: linspace(10.0, 2010.0, 41),
        drive_frequency_hz: 5.0e9,
        artificial_detuning_hz: 2.0e6,
        readout_frequency_hz: 7.25e9,
        nshots: 128,
    };
    let mut dev_a = Device::new(truth.clone()).unwrap();
    let mut dev_b = Device::new(truth).unwrap();
    let out_a = (dev_a.simulate(&spec).unwrap(), dev_a.simulate(&ramsey).unwrap());
    let out_b = (dev_b.simulate(&spec).unwrap(), dev_b.simulate(&ramsey).unwrap());
    assert_eq!(out_a, out_b);
}

#[test]
fn t2_exceeding_twice_t1_is_rejected() {
    let mut truth = demo_truth();
    truth.qubits.get_mut(&q0()).unwrap().t2_ns = 25_000.0;
    assert!(matches!(
        Device::new(truth),
        Err(DeviceError::InvalidTruth { .. })
    ));
}

#[test]
fn readout_dip_sits_at_dressed_frequency_plus_chi() {
    let truth = noiseless_truth();
    let qt = truth.qubits[&q0()].clone();
    let expected = qt.f_r_dressed_hz + qt.chi_hz;
    let freqs = linspace(expected - 3.0e6, expected + 3.0e6, 601);
    let mut dev = Device::new(truth).unwrap();
    let set = dev
        .simulate(&ExperimentSpec::ReadoutSweep {
            qubit: q0(),
            frequencies_hz: freqs.clone(),
            readout_amplitude: 0.25,
            prepared_state: 0,
            nshots: 1024,
        })
        .unwrap();
    let signal = set.array("signal").unwrap().as_c64().unwrap();
    let min_idx = signal
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
        .unwrap()
        .0;
    let step = freqs[1] - freqs[0];
    assert!(
        (freqs[min_idx] - expected).abs() <= step,
        "dip at {} expected {expected}",
        freqs[min_idx]
    );
}

#[test]
fn rabi_endpoints_cover_zero_and_full_rotation() {
    let truth = noiseless_truth();
    let a_pi = truth.qubits[&q0()].a_pi_true;
    let mut dev = Device::new(truth).unwrap();
    let set = dev
        .simulate(&ExperimentSpec::RabiAmplitude {
            qubit: q0(),
            amplitudes: vec![0.0, a_pi],
            drive_frequency_hz: 5.0e9,
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        })
        .unwrap();
    let p = probability(&set);
    assert!(p[0].abs() < 1e-12);
    assert!((p[1] - 1.0).abs() < 1e-12);
}

#[test]
fn t1_decay_hits_inverse_e_at_t1() {
    let truth = noiseless_truth();
    let t1 = truth.qubits[&q0()].t1_ns;
    let mut dev = Device::new(truth).unwrap();
    let set = dev
        .simulate(&ExperimentSpec::T1 {
            qubit: q0(),
            delays_ns: vec![0.0, t1],
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        })
        .unwrap();
    let p = probability(&set);
    assert!((p[0] - 1.0).abs() < 1e-12);
    assert!((p[1] - (-1.0f64).exp()).abs() < 1e-12);
}

fn ramsey_frequency(dev: &mut Device, drive: f64) -> f64 {
    let delays = linspace(10.0, 2010.0, 101);
    let set = dev
        .simulate(&ExperimentSpec::Ramsey {
            qubit: q0(),
            delays_ns: delays.clone(),
            drive_frequency_hz: drive,
            artificial_detuning_hz: 2.0e6,
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        })
        .unwrap();
    let p = probability(&set).to_vec();
    let seed = oscillation_seed(&delays, &p).unwrap();
    seed.frequency * 1e9
}

#[test]
fn flux_offset_shifts_ramsey_frequency() {
    let truth = noiseless_truth();
    let mut dev = Device::new(truth).unwrap();
    let f_before = ramsey_frequency(&mut dev, 5.0e9);
    assert!((f_before - 2.0e6).abs() < 5.0e4, "baseline {f_before}");

    // Move the qubit 1 MHz down: f_q(v_ss + d) = f_max sqrt(cos(pi d / V_p)).
    let qt = dev.truth().qubits[&q0()].clone();
    let target = qt.f_q_max_hz - 1.0e6;
    let cosine = (target / qt.f_q_max_hz).powi(2);
    let d = qt.v_period * cosine.acos() / std::f64::consts::PI;
    dev.set_flux_offset(&q0(), d).unwrap();
    let f_after = ramsey_frequency(&mut dev, 5.0e9);
    assert!(
        (f_after - 3.0e6).abs() < 5.0e4,
        "after offset: {f_after} (expected ~3 MHz)"
    );
}

#[test]
fn opposite_flux_offsets_cancel() {
    let truth = noiseless_truth();
    let mut dev = Device::new(truth).unwrap();
    dev.set_flux_offset(&q0(), 0.03).unwrap();
    dev.set_flux_offset(&q0(), -0.03).unwrap();
    assert_eq!(dev.flux_offset(&q0()), 0.0);
    let f = ramsey_frequency(&mut dev, 5.0e9);
    assert!((f - 2.0e6).abs() < 5.0e4);
}

#[test]
fn zero_offset_changes_nothing() {
    let truth = noiseless_truth();
    let spec = ExperimentSpec::T1 {
        qubit: q0(),
        delays_ns: linspace(0.0, 20_000.0, 21),
        readout_frequency_hz: 7.25e9,
        nshots: 1,
    };
    let mut dev_a = Device::new(truth.clone()).unwrap();
    let mut dev_b = Device::new(truth).unwrap();
    dev_b.set_flux_offset(&q0(), 0.0).unwrap();
    assert_eq!(dev_a.simulate(&spec).unwrap(), dev_b.simulate(&spec).unwrap());
}

#[test]
fn flux_dependence_is_symmetric_about_sweetspot() {
    let truth = demo_truth();
    let qt = &truth.qubits[&q0()];
    for d in [0.01, 0.05, 0.11, 0.2, 0.33] {
        let up = qt.qubit_frequency_hz(qt.v_sweetspot + d);
        let down = qt.qubit_frequency_hz(qt.v_sweetspot - d);
        assert!((up - down).abs() < 1e-6, "asymmetric at d = {d}");
    }
}

#[test]
fn punchout_shows_two_plateaus() {
    let truth = noiseless_truth();
    let qt = truth.qubits[&q0()].clone();
    let freqs = linspace(qt.f_r_dressed_hz - 4.0e6, qt.f_r_bare_hz + 4.0e6, 401);
    let amps = linspace(0.05, 0.8, 16);
    let mut dev = Device::new(truth).unwrap();
    let set = dev
        .simulate(&ExperimentSpec::PunchoutSweep {
            qubit: q0(),
            frequencies_hz: freqs.clone(),
            amplitudes: amps.clone(),
            nshots: 1024,
        })
        .unwrap();
    let signal = set.array("signal").unwrap().as_c64().unwrap();
    let nf = freqs.len();
    let mut dips = Vec::new();
    for (row, &amp) in amps.iter().enumerate() {
        let col = signal[row * nf..(row + 1) * nf]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .unwrap()
            .0;
        dips.push((amp, freqs[col]));
    }
    let step = freqs[1] - freqs[0];
    for (amp, dip) in dips {
        let expected = if amp > qt.punchout_amplitude {
            qt.f_r_bare_hz
        } else {
            qt.f_r_dressed_hz + qt.chi_hz
        };
        assert!(
            (dip - expected).abs() <= step,
            "amp {amp}: dip {dip} expected {expected}"
        );
    }
}

#[test]
fn noiseless_rb_survival_is_exactly_one() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut truth = noiseless_truth();
    {
        let qt = truth.qubits.get_mut(&q0()).unwrap();
        qt.t1_ns = f64::INFINITY;
        qt.t2_ns = f64::INFINITY;
    }
    let qt = truth.qubits[&q0()].clone();
    let pulse = PulseConfig {
        amplitude: qt.a_pi_true,
        duration_ns: qt.pi_duration_ref_ns,
        frequency_hz: qt.f_q_max_hz,
        drag_beta: qt.drag_beta_opt,
    };
    let table = clifford::clifford_table();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(99);
    let mut sequences = Vec::new();
    for depth in [1usize, 5, 20, 100] {
        for _ in 0..3 {
            let mut seq: Vec<u8> = (0..depth).map(|_| rng.gen_range(0..24) as u8).collect();
            let net = table.net_of_sequence(&seq);
            seq.push(table.inverse(net) as u8);
            sequences.push(seq);
        }
    }
    let mut dev = Device::new(truth).unwrap();
    let set = dev
        .simulate(&ExperimentSpec::CliffordSequences {
            qubit: q0(),
            sequences,
            pulse,
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        })
        .unwrap();
    for (i, p) in probability(&set).iter().enumerate() {
        let survival = 1.0 - p;
        assert!((survival - 1.0).abs() < 1e-9, "sequence {i}: survival {survival}");
    }
}

#[test]
fn sampled_shots_match_closed_form_probability() {
    // nshots = 1e5; the classified empirical mean must sit within 5 sigma
    // of the closed-form probability. Noise-free IQ keeps classification
    // exact so the only stochasticity is binomial.
    let mut truth = demo_truth();
    for qt in truth.qubits.values_mut() {
        qt.iq_sigma = 0.0;
    }
    truth.noise.shot_sampling = true;
    let nshots = 100_000u32;
    let mut dev = Device::new(truth).unwrap();
    let set = dev
        .simulate(&ExperimentSpec::T1 {
            qubit: q0(),
            delays_ns: vec![5_000.0],
            readout_frequency_hz: 7.25e9,
            nshots,
        })
        .unwrap();
    let iq = set.array("iq").unwrap();
    assert_eq!(iq.shape(), &[1, nshots as usize, 2]);
    let data = iq.as_f64().unwrap();
    // Excited shots have negative Q at the dressed midpoint, ground positive
    // ... distinguish by Q sign relative to the midpoint of the two means.
    let mut excited = 0usize;
    for shot in data.chunks(2) {
        if shot[1] > 0.0 {
            excited += 1;
        }
    }
    let p_expected = (-5_000.0f64 / 10_000.0).exp();
    let p_hat = excited as f64 / nshots as f64;
    let sigma = (p_expected * (1.0 - p_expected) / nshots as f64).sqrt();
    assert!(
        (p_hat - p_expected).abs() < 5.0 * sigma,
        "p_hat {p_hat} vs {p_expected} (sigma {sigma})"
    );
}

#[test]
fn probabilities_stay_in_unit_interval() {
    let truth = noiseless_truth();
    let mut dev = Device::new(truth).unwrap();
    let specs = vec![
        ExperimentSpec::Ramsey {
            qubit: q0(),
            delays_ns: linspace(0.0, 12_000.0, 97),
            drive_frequency_hz: 5.003e9,
            artificial_detuning_hz: 1.7e6,
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        },
        ExperimentSpec::Chevron {
            pair: "q0-q1".into(),
            amplitudes: linspace(0.2, 0.5, 16),
            durations_ns: linspace(4.0, 200.0, 50),
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        },
        ExperimentSpec::Flipping {
            qubit: q0(),
            n_flips: (0..40).collect(),
            set_amplitude: 0.57,
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        },
    ];
    for spec in specs {
        let set = dev.simulate(&spec).unwrap();
        for &p in probability(&set) {
            assert!((0.0..=1.0).contains(&p), "probability {p} out of range");
        }
    }
}

#[test]
fn unknown_targets_are_rejected() {
    let mut dev = Device::new(demo_truth()).unwrap();
    let err = dev
        .simulate(&ExperimentSpec::T1 {
            qubit: QubitId::new("q9"),
            delays_ns: vec![1.0],
            readout_frequency_hz: 7.25e9,
            nshots: 1,
        })
        .unwrap_err();
    assert!(matches!(err, DeviceError::UnknownQubit(_)));
    assert!(dev.set_flux_offset(&QubitId::new("q9"), 0.1).is_err());
}

#[test]
fn echo_exceeds_ramsey_time() {
    let truth = demo_truth();
    let qt = &truth.qubits[&q0()];
    let bias = qt.v_sweetspot;
    assert!(qt.t2_echo_eff_ns(bias) > qt.t2_eff_ns(bias));
    assert!(qt.t2_echo_eff_ns(bias) <= 2.0 * qt.t1_eff_ns(bias));
}

#[test]
fn truth_round_trips_through_directory() {
    let dir = tempfile::tempdir().unwrap();
    let truth = demo_truth();
    save_truth(&truth, dir.path()).unwrap();
    let back = load_truth(dir.path()).unwrap();
    assert_eq!(back.noise.seed, truth.noise.seed);
    assert_eq!(back.qubits.len(), 2);
    assert!(load_truth(tempfile::tempdir().unwrap().path()).is_err());
}
