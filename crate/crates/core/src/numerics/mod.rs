//! Fitting and optimization engine: nonlinear least squares, derivative-free
//! simplex optimization, oscillation seeding and IQ shot classification.
//!
//! All operations are pure functions of their inputs.

mod classifier;
mod lm;
mod models;
mod nelder_mead;
mod oscillation;

pub use classifier::{classify, train_linear_discriminant, TrainedClassifier};
pub use lm::{levenberg_marquardt, FitResult};
pub use models::{cosine, damped_cos, exp_decay, lorentzian, parabola, ModelSpec};
pub use nelder_mead::{nelder_mead, NelderMeadOutcome};
pub use oscillation::{oscillation_seed, OscillationSeed};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("fit needs at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite residual at the initial point")]
    NonFiniteResidual,
    #[error("non-finite objective at an initial simplex vertex")]
    NonFiniteObjective,
    #[error("x grid is not uniformly spaced (relative deviation {deviation:.2e})")]
    NonUniformGrid { deviation: f64 },
    #[error("{0}")]
    Precondition(String),
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut p = phi % two_pi;
    if p <= -std::f64::consts::PI {
        p += two_pi;
    } else if p > std::f64::consts::PI {
        p -= two_pi;
    }
    p
}

/// Canonicalize an (amplitude, frequency, phase) triple: amplitude and
/// frequency made positive by absorbing signs into the phase, phase wrapped
/// to `(-pi, pi]`.
pub fn canonical_oscillation(amplitude: f64, frequency: f64, phase: f64) -> (f64, f64, f64) {
    let mut a = amplitude;
    let mut f = frequency;
    let mut p = phase;
    if f < 0.0 {
        // cos(2pi f x + p) = cos(2pi (-f) x - p)
        f = -f;
        p = -p;
    }
    if a < 0.0 {
        a = -a;
        p += std::f64::consts::PI;
    }
    (a, f, wrap_phase(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_into_half_open_interval() {
        assert!((wrap_phase(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(wrap_phase(0.0), 0.0);
        let w = wrap_phase(-std::f64::consts::PI);
        assert!((w - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn canonical_form_fixes_signs() {
        let (a, f, p) = canonical_oscillation(-1.0, -2.0, 0.5);
        assert_eq!(a, 1.0);
        assert_eq!(f, 2.0);
        // cos(-2pi*2x + 0.5) = cos(2pi*2x - 0.5); negated amplitude adds pi.
        assert!((p - (-0.5 + std::f64::consts::PI)).abs() < 1e-12);
    }
}
