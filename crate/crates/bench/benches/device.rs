use criterion::{criterion_group, criterion_main, Criterion};
use qcal_core::demo::demo_truth;
use qcal_core::device::{Device, ExperimentSpec, PulseConfig};
use qcal_core::platform::QubitId;
use qcal_core::protocols::sample_rb_sequences;

fn bench_ramsey_acquisition(c: &mut Criterion) {
    let truth = demo_truth();
    let mut device = Device::new(truth).unwrap();
    let spec = ExperimentSpec::Ramsey {
        qubit: QubitId::new("q0"),
        delays_ns: (0..61).map(|i| 10.0 + i as f64 * 50.0).collect(),
        drive_frequency_hz: 5.0e9,
        artificial_detuning_hz: 2.0e6,
        readout_frequency_hz: 7.25e9,
        nshots: 1024,
    };
    c.bench_function("ramsey_61pts_1024shots", |b| {
        b.iter(|| device.simulate(&spec).unwrap())
    });
}

fn bench_clifford_sequences(c: &mut Criterion) {
    let mut truth = demo_truth();
    truth.noise.shot_sampling = false;
    let mut device = Device::new(truth).unwrap();
    let (sequences, _) = sample_rb_sequences(&[1, 60, 160, 300], 10, 42);
    let spec = ExperimentSpec::CliffordSequences {
        qubit: QubitId::new("q0"),
        sequences,
        pulse: PulseConfig {
            amplitude: 0.5,
            duration_ns: 40.0,
            frequency_hz: 5.0e9,
            drag_beta: 0.12,
        },
        readout_frequency_hz: 7.25e9,
        nshots: 1,
    };
    c.bench_function("rb_40_sequences_to_depth_300", |b| {
        b.iter(|| device.simulate(&spec).unwrap())
    });
}

fn bench_flux_map(c: &mut Criterion) {
    let truth = demo_truth();
    let mut device = Device::new(truth).unwrap();
    let spec = ExperimentSpec::FluxMap {
        qubit: QubitId::new("q0"),
        frequencies_hz: (0..161).map(|i| 4.92e9 + i as f64 * 1.0e6).collect(),
        biases_v: (0..21).map(|i| 0.04 + i as f64 * 0.006).collect(),
        nshots: 1024,
    };
    c.bench_function("flux_map_161x21", |b| {
        b.iter(|| device.simulate(&spec).unwrap())
    });
}

criterion_group!(
    benches,
    bench_ramsey_acquisition,
    bench_clifford_sequences,
    bench_flux_map
);
criterion_main!(benches);
