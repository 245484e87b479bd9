//! Deterministic, seedable virtual device.
//!
//! The device owns hidden [`DeviceTruth`] parameters and synthesizes noisy
//! measurement data for every supported experiment kind. Identical seed and
//! identical ordered call sequence produce bit-identical outputs.
//!
//! Qubits idle at their true sweetspot; [`Device::set_flux_offset`] shifts
//! the operating point additively, modeling both deliberate bias moves and
//! background flux drift. Sweeps that carry explicit bias values evaluate
//! the flux model at `bias + offset`.
//!
//! Shot-mode readout operates in the dispersive regime: each shot samples a
//! state from the excitation probability and emits that state's mean IQ
//! (from the S21 model at the requested readout frequency) plus Gaussian
//! noise per quadrature. With `shot_sampling` off, shot-mode acquisitions
//! return the closed-form probabilities instead.

pub mod clifford;
pub mod density;
mod spec;
mod truth;

pub use spec::{ArrayData, ArraySet, ExperimentSpec, MetaValue, NamedArray, PulseConfig};
pub use truth::{load_truth, save_truth, DeviceTruth, NoiseModel, PairTruth, QubitTruth};

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::platform::QubitId;
use density::{imperfect_x90, GateChannel};

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("unknown qubit {0:?}")]
    UnknownQubit(String),
    #[error("unknown pair {0:?}")]
    UnknownPair(String),
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("invalid truth at {field}: {message}")]
    InvalidTruth { field: String, message: String },
    #[error("failed to read {path}: {source}")]
    TruthIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed truth document {path}: {source}")]
    TruthMalformed {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub struct Device {
    truth: DeviceTruth,
    flux_offsets: BTreeMap<QubitId, f64>,
    rng: ChaCha12Rng,
}

impl Device {
    pub fn new(truth: DeviceTruth) -> Result<Self, DeviceError> {
        truth.validate()?;
        let rng = ChaCha12Rng::seed_from_u64(truth.noise.seed);
        Ok(Device {
            truth,
            flux_offsets: BTreeMap::new(),
            rng,
        })
    }

    /// Restart the noise stream; used by the executor to give every action
    /// an id-derived sub-seed.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha12Rng::seed_from_u64(seed);
    }

    pub fn truth(&self) -> &DeviceTruth {
        &self.truth
    }

    /// Shift a qubit's flux operating point; offsets accumulate additively.
    pub fn set_flux_offset(&mut self, qubit: &QubitId, delta_v: f64) -> Result<(), DeviceError> {
        if !self.truth.qubits.contains_key(qubit) {
            return Err(DeviceError::UnknownQubit(qubit.as_str().to_string()));
        }
        *self.flux_offsets.entry(qubit.clone()).or_insert(0.0) += delta_v;
        Ok(())
    }

    pub fn flux_offset(&self, qubit: &QubitId) -> f64 {
        self.flux_offsets.get(qubit).copied().unwrap_or(0.0)
    }

    fn qubit_truth(&self, qubit: &QubitId) -> Result<&QubitTruth, DeviceError> {
        self.truth
            .qubits
            .get(qubit)
            .ok_or_else(|| DeviceError::UnknownQubit(qubit.as_str().to_string()))
    }

    fn pair_truth(&self, key: &str) -> Result<&PairTruth, DeviceError> {
        self.truth
            .pairs
            .get(key)
            .ok_or_else(|| DeviceError::UnknownPair(key.to_string()))
    }

    /// Current operating bias of a qubit: its true sweetspot plus offsets.
    fn operating_bias(&self, qubit: &QubitId) -> Result<f64, DeviceError> {
        Ok(self.qubit_truth(qubit)?.v_sweetspot + self.flux_offset(qubit))
    }

    fn gauss(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn complex_noise(&mut self, sigma: f64) -> Complex64 {
        let re: f64 = self.gauss();
        let im: f64 = self.gauss();
        Complex64::new(re * sigma, im * sigma)
    }

    /// Run one acquisition. Advancing the RNG is the only state change.
    pub fn simulate(&mut self, spec: &ExperimentSpec) -> Result<ArraySet, DeviceError> {
        spec.validate()?;
        use ExperimentSpec::*;
        match spec {
            ReadoutSweep {
                qubit,
                frequencies_hz,
                readout_amplitude,
                prepared_state,
                nshots,
            } => self.readout_sweep(qubit, frequencies_hz, *readout_amplitude, *prepared_state, *nshots),
            PunchoutSweep {
                qubit,
                frequencies_hz,
                amplitudes,
                nshots,
            } => self.punchout(qubit, frequencies_hz, amplitudes, *nshots),
            DriveSweep {
                qubit,
                frequencies_hz,
                bias_v,
                nshots,
            } => self.drive_sweep(qubit, frequencies_hz, *bias_v, *nshots),
            FluxMap {
                qubit,
                frequencies_hz,
                biases_v,
                nshots,
            } => self.flux_map(qubit, frequencies_hz, biases_v, *nshots),
            RabiAmplitude {
                qubit,
                amplitudes,
                drive_frequency_hz,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?;
                let f_q = qt.qubit_frequency_hz(self.operating_bias(qubit)?);
                let contrast =
                    off_resonance_contrast(*drive_frequency_hz, f_q, qt.drive_linewidth_hz);
                let a_pi = qt.a_pi_true;
                let probs: Vec<f64> = amplitudes
                    .iter()
                    .map(|a| {
                        let angle = std::f64::consts::PI * a / (2.0 * a_pi);
                        clamp01(contrast * angle.sin().powi(2))
                    })
                    .collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert(
                    "amplitude",
                    NamedArray::f64(vec![amplitudes.len()], amplitudes.clone()),
                );
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("drive_frequency_hz", *drive_frequency_hz);
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            RabiDuration {
                qubit,
                durations_ns,
                drive_amplitude,
                drive_frequency_hz,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?;
                let f_q = qt.qubit_frequency_hz(self.operating_bias(qubit)?);
                let contrast =
                    off_resonance_contrast(*drive_frequency_hz, f_q, qt.drive_linewidth_hz);
                let rate = drive_amplitude / qt.a_pi_true;
                let t_ref = qt.pi_duration_ref_ns;
                let probs: Vec<f64> = durations_ns
                    .iter()
                    .map(|t| {
                        let angle = std::f64::consts::PI * t * rate / (2.0 * t_ref);
                        clamp01(contrast * angle.sin().powi(2))
                    })
                    .collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert(
                    "duration_ns",
                    NamedArray::f64(vec![durations_ns.len()], durations_ns.clone()),
                );
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("drive_amplitude", *drive_amplitude);
                set.set_meta("drive_frequency_hz", *drive_frequency_hz);
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            Ramsey {
                qubit,
                delays_ns,
                drive_frequency_hz,
                artificial_detuning_hz,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?;
                let bias = self.operating_bias(qubit)?;
                let f_q = qt.qubit_frequency_hz(bias);
                let t2 = qt.t2_eff_ns(bias);
                let delta_hz = drive_frequency_hz + artificial_detuning_hz - f_q;
                let probs: Vec<f64> = delays_ns
                    .iter()
                    .map(|tau| {
                        let phase = std::f64::consts::TAU * delta_hz * tau * 1e-9;
                        clamp01(0.5 + 0.5 * phase.cos() * (-tau / t2).exp())
                    })
                    .collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert(
                    "delay_ns",
                    NamedArray::f64(vec![delays_ns.len()], delays_ns.clone()),
                );
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("drive_frequency_hz", *drive_frequency_hz);
                set.set_meta("artificial_detuning_hz", *artificial_detuning_hz);
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            T1 {
                qubit,
                delays_ns,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?;
                let t1 = qt.t1_eff_ns(self.operating_bias(qubit)?);
                let probs: Vec<f64> = delays_ns
                    .iter()
                    .map(|tau| clamp01((-tau / t1).exp()))
                    .collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert(
                    "delay_ns",
                    NamedArray::f64(vec![delays_ns.len()], delays_ns.clone()),
                );
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            Echo {
                qubit,
                delays_ns,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?;
                let t2e = qt.t2_echo_eff_ns(self.operating_bias(qubit)?);
                let probs: Vec<f64> = delays_ns
                    .iter()
                    .map(|tau| clamp01(0.5 + 0.5 * (-tau / t2e).exp()))
                    .collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert(
                    "delay_ns",
                    NamedArray::f64(vec![delays_ns.len()], delays_ns.clone()),
                );
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            Flipping {
                qubit,
                n_flips,
                set_amplitude,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?;
                let epsilon = set_amplitude / qt.a_pi_true - 1.0;
                let probs: Vec<f64> = n_flips
                    .iter()
                    .map(|&n| {
                        let arg = std::f64::consts::TAU * epsilon * n as f64
                            + std::f64::consts::PI * epsilon / 2.0;
                        clamp01(0.5 + 0.5 * arg.sin())
                    })
                    .collect();
                let axis: Vec<f64> = n_flips.iter().map(|&n| n as f64).collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert("n_flips", NamedArray::f64(vec![axis.len()], axis));
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("set_amplitude", *set_amplitude);
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            Shots {
                qubit,
                prepared_state,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?.clone();
                let mean = shot_mean_iq(&qt, *readout_frequency_hz, *prepared_state);
                let sigma = qt.iq_sigma;
                let mut data = Vec::with_capacity(*nshots as usize * 2);
                for _ in 0..*nshots {
                    let noise = self.complex_noise(sigma);
                    data.push(mean.re + noise.re);
                    data.push(mean.im + noise.im);
                }
                let mut set = ArraySet::new();
                set.insert("iq", NamedArray::f64(vec![*nshots as usize, 2], data));
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("prepared_state", i64::from(*prepared_state));
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            DragSweep {
                qubit,
                betas,
                repetitions,
                readout_frequency_hz,
                nshots,
            } => {
                const K_BETA: f64 = 2.0;
                let qt = self.qubit_truth(qubit)?;
                let beta_opt = qt.drag_beta_opt;
                let probs: Vec<f64> = betas
                    .iter()
                    .map(|b| clamp01(K_BETA * (b - beta_opt) * (b - beta_opt)))
                    .collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert("beta", NamedArray::f64(vec![betas.len()], betas.clone()));
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("repetitions", *repetitions);
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            CliffordSequences {
                qubit,
                sequences,
                pulse,
                readout_frequency_hz,
                nshots,
            } => {
                let qt = self.qubit_truth(qubit)?;
                let bias = self.operating_bias(qubit)?;
                let f_q = qt.qubit_frequency_hz(bias);
                let x90 = imperfect_x90(pulse, qt.a_pi_true, f_q);
                const K_BETA_RB: f64 = 0.01;
                let depol = K_BETA_RB * (pulse.drag_beta - qt.drag_beta_opt).powi(2);
                let channel = GateChannel::from_times(
                    pulse.duration_ns,
                    qt.t1_eff_ns(bias),
                    qt.t2_eff_ns(bias),
                    depol,
                );
                let probs: Vec<f64> = sequences
                    .iter()
                    .map(|seq| clamp01(1.0 - density::sequence_survival(seq, &x90, &channel)))
                    .collect();
                let lengths: Vec<f64> = sequences.iter().map(|s| s.len() as f64).collect();
                let mut set = self.shot_output(
                    qubit,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert(
                    "sequence_length",
                    NamedArray::f64(vec![lengths.len()], lengths),
                );
                set.set_meta("qubit", qubit.as_str());
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            AvoidedCrossing {
                pair,
                frequencies_hz,
                biases_v,
                nshots,
            } => self.avoided_crossing(pair, frequencies_hz, biases_v, *nshots),
            Chevron {
                pair,
                amplitudes,
                durations_ns,
                readout_frequency_hz,
                nshots,
            } => {
                let pt = self.pair_truth(pair)?.clone();
                let (qa, _) = DeviceTruth::pair_qubits(pair);
                let two_g = 2.0 * pt.g_hz;
                let mut probs = Vec::with_capacity(amplitudes.len() * durations_ns.len());
                for a in amplitudes {
                    let delta = pt.detuning_slope_hz_per_unit * (a - pt.a_resonance);
                    let omega = (delta * delta + two_g * two_g).sqrt();
                    let weight = (two_g / omega).powi(2);
                    for t in durations_ns {
                        let phase = std::f64::consts::PI * omega * t * 1e-9;
                        probs.push(clamp01(weight * phase.sin().powi(2)));
                    }
                }
                let shape = vec![amplitudes.len(), durations_ns.len()];
                let mut set =
                    self.shot_output(&qa, *readout_frequency_hz, &probs, shape, *nshots)?;
                set.insert(
                    "amplitude",
                    NamedArray::f64(vec![amplitudes.len()], amplitudes.clone()),
                );
                set.insert(
                    "duration_ns",
                    NamedArray::f64(vec![durations_ns.len()], durations_ns.clone()),
                );
                set.set_meta("pair", pair.as_str());
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
            CzPhase {
                pair,
                phases_rad,
                control_state,
                readout_frequency_hz,
                nshots,
            } => {
                let pt = self.pair_truth(pair)?.clone();
                let (qa, _) = DeviceTruth::pair_qubits(pair);
                let static_phase = if *control_state == 1 {
                    pt.phi_a_rad + pt.phi_cond_rad
                } else {
                    pt.phi_a_rad
                };
                let probs: Vec<f64> = phases_rad
                    .iter()
                    .map(|theta| clamp01(0.5 + 0.5 * (theta + static_phase).cos()))
                    .collect();
                let mut set = self.shot_output(
                    &qa,
                    *readout_frequency_hz,
                    &probs,
                    vec![probs.len()],
                    *nshots,
                )?;
                set.insert(
                    "phase_rad",
                    NamedArray::f64(vec![phases_rad.len()], phases_rad.clone()),
                );
                set.set_meta("pair", pair.as_str());
                set.set_meta("control_state", i64::from(*control_state));
                set.set_meta("readout_frequency_hz", *readout_frequency_hz);
                set.set_meta("nshots", *nshots);
                Ok(set)
            }
        }
    }

    fn readout_sweep(
        &mut self,
        qubit: &QubitId,
        frequencies: &[f64],
        readout_amplitude: f64,
        prepared_state: u8,
        nshots: u32,
    ) -> Result<ArraySet, DeviceError> {
        let qt = self.qubit_truth(qubit)?.clone();
        let sigma = averaged_sigma(qt.iq_sigma, nshots);
        let mut signal = Vec::with_capacity(frequencies.len());
        for &f in frequencies {
            let response =
                qt.readout_gain * readout_amplitude * s21(&qt, f, prepared_state, readout_amplitude);
            signal.push(response + self.complex_noise(sigma));
        }
        let mut set = ArraySet::new();
        set.insert(
            "frequency_hz",
            NamedArray::f64(vec![frequencies.len()], frequencies.to_vec()),
        );
        set.insert("signal", NamedArray::c64(vec![signal.len()], signal));
        set.set_meta("qubit", qubit.as_str());
        set.set_meta("readout_amplitude", readout_amplitude);
        set.set_meta("prepared_state", i64::from(prepared_state));
        Ok(set)
    }

    fn punchout(
        &mut self,
        qubit: &QubitId,
        frequencies: &[f64],
        amplitudes: &[f64],
        nshots: u32,
    ) -> Result<ArraySet, DeviceError> {
        let qt = self.qubit_truth(qubit)?.clone();
        let sigma = averaged_sigma(qt.iq_sigma, nshots);
        let mut signal = Vec::with_capacity(frequencies.len() * amplitudes.len());
        for &a in amplitudes {
            for &f in frequencies {
                let response = qt.readout_gain * a * s21(&qt, f, 0, a);
                signal.push(response + self.complex_noise(sigma));
            }
        }
        let mut set = ArraySet::new();
        set.insert(
            "frequency_hz",
            NamedArray::f64(vec![frequencies.len()], frequencies.to_vec()),
        );
        set.insert(
            "amplitude",
            NamedArray::f64(vec![amplitudes.len()], amplitudes.to_vec()),
        );
        set.insert(
            "signal",
            NamedArray::c64(vec![amplitudes.len(), frequencies.len()], signal),
        );
        set.set_meta("qubit", qubit.as_str());
        Ok(set)
    }

    fn drive_sweep(
        &mut self,
        qubit: &QubitId,
        frequencies: &[f64],
        bias_v: f64,
        nshots: u32,
    ) -> Result<ArraySet, DeviceError> {
        let qt = self.qubit_truth(qubit)?.clone();
        let f_q = qt.qubit_frequency_hz(bias_v + self.flux_offset(qubit));
        let sigma = averaged_sigma(qt.iq_sigma, nshots);
        let signal = self.two_tone_column(&qt, frequencies, f_q, sigma);
        let mut set = ArraySet::new();
        set.insert(
            "frequency_hz",
            NamedArray::f64(vec![frequencies.len()], frequencies.to_vec()),
        );
        set.insert("signal", NamedArray::c64(vec![signal.len()], signal));
        set.set_meta("qubit", qubit.as_str());
        set.set_meta("bias_v", bias_v);
        Ok(set)
    }

    fn flux_map(
        &mut self,
        qubit: &QubitId,
        frequencies: &[f64],
        biases: &[f64],
        nshots: u32,
    ) -> Result<ArraySet, DeviceError> {
        let qt = self.qubit_truth(qubit)?.clone();
        let offset = self.flux_offset(qubit);
        let sigma = averaged_sigma(qt.iq_sigma, nshots);
        let mut signal = Vec::with_capacity(frequencies.len() * biases.len());
        for &b in biases {
            let f_q = qt.qubit_frequency_hz(b + offset);
            signal.extend(self.two_tone_column(&qt, frequencies, f_q, sigma));
        }
        let mut set = ArraySet::new();
        set.insert(
            "frequency_hz",
            NamedArray::f64(vec![frequencies.len()], frequencies.to_vec()),
        );
        set.insert("bias_v", NamedArray::f64(vec![biases.len()], biases.to_vec()));
        set.insert(
            "signal",
            NamedArray::c64(vec![biases.len(), frequencies.len()], signal),
        );
        set.set_meta("qubit", qubit.as_str());
        Ok(set)
    }

    /// Two-tone response: Lorentzian peak in |IQ| centered on the qubit
    /// frequency with FWHM equal to the drive linewidth.
    fn two_tone_column(
        &mut self,
        qt: &QubitTruth,
        frequencies: &[f64],
        f_q: f64,
        sigma: f64,
    ) -> Vec<Complex64> {
        let width = qt.drive_linewidth_hz;
        frequencies
            .iter()
            .map(|&f| {
                let u = 2.0 * (f - f_q) / width;
                let peak = 1.0 / (1.0 + u * u);
                let base = qt.readout_gain * (0.05 + 0.95 * peak);
                Complex64::new(base, 0.0) + self.complex_noise(sigma)
            })
            .collect()
    }

    fn avoided_crossing(
        &mut self,
        pair: &str,
        frequencies: &[f64],
        biases: &[f64],
        nshots: u32,
    ) -> Result<ArraySet, DeviceError> {
        let pt = self.pair_truth(pair)?.clone();
        let (qa_id, qb_id) = DeviceTruth::pair_qubits(pair);
        let qa = self.qubit_truth(&qa_id)?.clone();
        let qb = self.qubit_truth(&qb_id)?.clone();
        let f_b = qb.qubit_frequency_hz(self.operating_bias(&qb_id)?);
        let offset_a = self.flux_offset(&qa_id);
        let width = qa.drive_linewidth_hz;
        let sigma = averaged_sigma(qa.iq_sigma, nshots);
        let mut signal = Vec::with_capacity(frequencies.len() * biases.len());
        for &bias in biases {
            let f_a = qa.qubit_frequency_hz(bias + offset_a);
            let mid = 0.5 * (f_a + f_b);
            let gap = (0.25 * (f_a - f_b) * (f_a - f_b) + pt.g_hz * pt.g_hz).sqrt();
            let branches = [mid - gap, mid + gap];
            for &f in frequencies {
                let mut peak = 0.0;
                for fb in branches {
                    let u = 2.0 * (f - fb) / width;
                    peak += 0.45 / (1.0 + u * u);
                }
                let base = qa.readout_gain * (0.05 + peak);
                signal.push(Complex64::new(base, 0.0) + self.complex_noise(sigma));
            }
        }
        let mut set = ArraySet::new();
        set.insert(
            "frequency_hz",
            NamedArray::f64(vec![frequencies.len()], frequencies.to_vec()),
        );
        set.insert("bias_v", NamedArray::f64(vec![biases.len()], biases.to_vec()));
        set.insert(
            "signal",
            NamedArray::c64(vec![biases.len(), frequencies.len()], signal),
        );
        set.set_meta("pair", pair);
        Ok(set)
    }

    /// Emit shot-mode output for a grid of excitation probabilities:
    /// sampled IQ shots when `shot_sampling` is on, the probabilities
    /// themselves otherwise. `shape` is the logical point grid shape.
    fn shot_output(
        &mut self,
        qubit: &QubitId,
        readout_frequency_hz: f64,
        probs: &[f64],
        shape: Vec<usize>,
        nshots: u32,
    ) -> Result<ArraySet, DeviceError> {
        debug_assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        let qt = self.qubit_truth(qubit)?.clone();
        let mut set = ArraySet::new();
        if self.truth.noise.shot_sampling {
            let mean0 = shot_mean_iq(&qt, readout_frequency_hz, 0);
            let mean1 = shot_mean_iq(&qt, readout_frequency_hz, 1);
            let sigma = qt.iq_sigma;
            let mut data = Vec::with_capacity(probs.len() * nshots as usize * 2);
            for &p in probs {
                for _ in 0..nshots {
                    let excited = self.rng.gen::<f64>() < p;
                    let mean = if excited { mean1 } else { mean0 };
                    let noise = self.complex_noise(sigma);
                    data.push(mean.re + noise.re);
                    data.push(mean.im + noise.im);
                }
            }
            let shot_shape: Vec<usize> = shape
                .iter()
                .copied()
                .chain([nshots as usize, 2])
                .collect();
            set.insert("iq", NamedArray::f64(shot_shape, data));
        } else {
            set.insert("probability", NamedArray::f64(shape, probs.to_vec()));
        }
        Ok(set)
    }
}

/// Complex resonator response `1 - (k/2) / ((k/2) + i (f - f_state))`.
///
/// Above the punchout amplitude the resonator responds at its bare
/// frequency regardless of qubit state; below, at the state-dependent
/// dressed frequency `f_r_dressed + chi` (|0>) or `- chi` (|1>).
fn s21(qt: &QubitTruth, f_hz: f64, state: u8, readout_amplitude: f64) -> Complex64 {
    let f_state = if readout_amplitude > qt.punchout_amplitude {
        qt.f_r_bare_hz
    } else if state == 0 {
        qt.f_r_dressed_hz + qt.chi_hz
    } else {
        qt.f_r_dressed_hz - qt.chi_hz
    };
    let half_kappa = 0.5 * qt.resonator_linewidth_hz;
    let denom = Complex64::new(half_kappa, f_hz - f_state);
    Complex64::new(1.0, 0.0) - half_kappa / denom
}

/// Mean IQ of a prepared state for shot encoding (dispersive regime,
/// amplitude folded into the gain).
fn shot_mean_iq(qt: &QubitTruth, readout_frequency_hz: f64, state: u8) -> Complex64 {
    qt.readout_gain * s21(qt, readout_frequency_hz, state, 0.0)
}

/// Probability contrast of off-resonant driving,
/// `1 / (1 + ((f_drive - f_q) / linewidth)^2)`.
fn off_resonance_contrast(f_drive_hz: f64, f_q_hz: f64, linewidth_hz: f64) -> f64 {
    let detune = (f_drive_hz - f_q_hz) / linewidth_hz;
    1.0 / (1.0 + detune * detune)
}

fn clamp01(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Signal-mode acquisitions average `nshots` single shots per point.
fn averaged_sigma(iq_sigma: f64, nshots: u32) -> f64 {
    iq_sigma / (nshots.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests;
