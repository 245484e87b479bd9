//! Two-level density-matrix engine behind the Clifford-sequence acquisition.
//!
//! Virtual RZ rotations are perfect; each physical RX(pi/2) applies an
//! imperfect unitary followed by amplitude damping, pure dephasing and a
//! DRAG-dependent depolarizing channel.

use num_complex::Complex64;

use super::clifford::{clifford_table, rotation_axis, rz, Mat2};
use super::spec::PulseConfig;

/// Per-physical-gate noise channel, precomputed from truth and pulse config.
#[derive(Debug, Clone, Copy)]
pub struct GateChannel {
    /// Amplitude damping probability `1 - exp(-t_gate / T1)`.
    pub gamma1: f64,
    /// Extra coherence decay factor `exp(-t_gate (1/T2 - 1/(2 T1)))`.
    pub dephase: f64,
    /// Depolarizing weight from DRAG miscalibration.
    pub depol: f64,
}

impl GateChannel {
    pub fn from_times(t_gate_ns: f64, t1_ns: f64, t2_ns: f64, depol: f64) -> Self {
        let gamma1 = 1.0 - (-t_gate_ns / t1_ns).exp();
        let phi_rate = (1.0 / t2_ns - 0.5 / t1_ns).max(0.0);
        GateChannel {
            gamma1,
            dephase: (-t_gate_ns * phi_rate).exp(),
            depol,
        }
    }
}

/// The imperfect physical RX(pi/2): over- or under-rotation from the
/// amplitude ratio, and a detuned drive generator `(omega X + delta Z)/2`
/// that tilts the rotation axis out of the equator by the accumulated
/// detuning phase `2 pi (f_drive - f_q) t`.
pub fn imperfect_x90(pulse: &PulseConfig, a_pi_true: f64, f_q_hz: f64) -> Mat2 {
    let omega_t = std::f64::consts::FRAC_PI_2 * (pulse.amplitude / a_pi_true);
    let delta_t = std::f64::consts::TAU * (pulse.frequency_hz - f_q_hz) * pulse.duration_ns * 1e-9;
    let theta = (omega_t * omega_t + delta_t * delta_t).sqrt();
    if theta < 1e-300 {
        return Mat2::identity();
    }
    rotation_axis(theta, omega_t / theta, 0.0, delta_t / theta)
}

#[derive(Debug, Clone, Copy)]
pub struct DensityMatrix {
    rho00: f64,
    rho11: f64,
    rho01: Complex64,
}

impl DensityMatrix {
    pub fn ground() -> Self {
        DensityMatrix {
            rho00: 1.0,
            rho11: 0.0,
            rho01: Complex64::new(0.0, 0.0),
        }
    }

    pub fn population_ground(&self) -> f64 {
        self.rho00.clamp(0.0, 1.0)
    }

    fn apply_unitary(&mut self, u: &Mat2) {
        let m = &u.0;
        let rho = [
            [Complex64::new(self.rho00, 0.0), self.rho01],
            [self.rho01.conj(), Complex64::new(self.rho11, 0.0)],
        ];
        // U rho U†
        let mut tmp = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in tmp.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = m[i][0] * rho[0][j] + m[i][1] * rho[1][j];
            }
        }
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = tmp[i][0] * m[j][0].conj() + tmp[i][1] * m[j][1].conj();
            }
        }
        self.rho00 = out[0][0].re;
        self.rho11 = out[1][1].re;
        self.rho01 = out[0][1];
    }

    fn apply_channel(&mut self, ch: &GateChannel) {
        // Amplitude damping.
        let gamma = ch.gamma1;
        self.rho00 += gamma * self.rho11;
        self.rho11 *= 1.0 - gamma;
        self.rho01 *= (1.0 - gamma).sqrt() * ch.dephase;
        // Depolarizing toward the maximally mixed state.
        let lambda = ch.depol.clamp(0.0, 1.0);
        if lambda > 0.0 {
            self.rho00 = (1.0 - lambda) * self.rho00 + 0.5 * lambda;
            self.rho11 = (1.0 - lambda) * self.rho11 + 0.5 * lambda;
            self.rho01 *= 1.0 - lambda;
        }
    }
}

/// Play one Clifford as its ZXZXZ decomposition: virtual RZs are perfect,
/// each physical gate is `x90` followed by the noise channel.
pub fn play_clifford(
    rho: &mut DensityMatrix,
    index: usize,
    x90: &Mat2,
    channel: &GateChannel,
) {
    let (a, b, c) = clifford_table().element(index).zxzxz;
    rho.apply_unitary(&rz(c));
    rho.apply_unitary(x90);
    rho.apply_channel(channel);
    rho.apply_unitary(&rz(b));
    rho.apply_unitary(x90);
    rho.apply_channel(channel);
    rho.apply_unitary(&rz(a));
}

/// Ground-state survival probability after playing a full sequence
/// (recovery included by the caller).
pub fn sequence_survival(sequence: &[u8], x90: &Mat2, channel: &GateChannel) -> f64 {
    let mut rho = DensityMatrix::ground();
    for &idx in sequence {
        play_clifford(&mut rho, idx as usize, x90, channel);
    }
    rho.population_ground()
}
