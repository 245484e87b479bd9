//! DFT-based seeding of oscillation fits.

use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationSeed {
    /// Frequency of the dominant non-zero bin, in cycles per x unit.
    pub frequency: f64,
    pub amplitude: f64,
    /// Phase referenced to the first sample.
    pub phase: f64,
    pub offset: f64,
}

/// Estimate `(frequency, amplitude, phase, offset)` of `y ~ offset +
/// amplitude * cos(2 pi frequency (x - x[0]) + phase)` from the dominant
/// discrete-Fourier bin of the mean-subtracted signal.
///
/// `x` must be uniformly spaced with at least 8 samples. For a constant
/// signal the amplitude is ~0 and the frequency falls back to the first
/// non-zero bin.
pub fn oscillation_seed(x: &[f64], y: &[f64]) -> Result<OscillationSeed, NumericsError> {
    if x.len() != y.len() {
        return Err(NumericsError::Precondition(
            "x and y lengths differ".into(),
        ));
    }
    let n = x.len();
    if n < 8 {
        return Err(NumericsError::Precondition(format!(
            "need at least 8 samples, got {n}"
        )));
    }
    let dx = (x[n - 1] - x[0]) / (n - 1) as f64;
    if dx == 0.0 || !dx.is_finite() {
        return Err(NumericsError::NonUniformGrid { deviation: f64::INFINITY });
    }
    let mut worst = 0.0f64;
    for i in 1..n {
        let spacing = x[i] - x[i - 1];
        let dev = ((spacing - dx) / dx).abs();
        worst = worst.max(dev);
    }
    if worst > 1e-6 {
        return Err(NumericsError::NonUniformGrid { deviation: worst });
    }

    let offset = y.iter().sum::<f64>() / n as f64;
    let mut best_bin = 1usize;
    let mut best_mag = -1.0f64;
    let mut best = (0.0f64, 0.0f64);
    for k in 1..=n / 2 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (i, &yi) in y.iter().enumerate() {
            let angle = -std::f64::consts::TAU * (k * i) as f64 / n as f64;
            let centered = yi - offset;
            re += centered * angle.cos();
            im += centered * angle.sin();
        }
        let mag = (re * re + im * im).sqrt();
        if mag > best_mag {
            best_mag = mag;
            best_bin = k;
            best = (re, im);
        }
    }

    let span = n as f64 * dx;
    let amplitude = 2.0 * best_mag / n as f64;
    // A numerically constant signal leaves only rounding dust in the
    // spectrum; fall back to the first non-zero bin by convention.
    if amplitude < 1e-12 * offset.abs().max(1.0) {
        best_bin = 1;
        best = (0.0, 0.0);
    }
    let frequency = best_bin as f64 / span;
    let phase = best.1.atan2(best.0);
    Ok(OscillationSeed {
        frequency,
        amplitude,
        phase,
        offset,
    })
}
