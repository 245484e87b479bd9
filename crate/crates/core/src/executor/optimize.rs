//! Derivative-free pulse optimization driven by randomized benchmarking.
//!
//! The objective is `1 - p` where `p` is the fitted RB decay after setting
//! the candidate pi-pulse amplitude and DRAG beta. Every evaluation reuses
//! one action id, so the device noise stream is common across candidates
//! and the simplex sees a deterministic objective.

use serde::{Deserialize, Serialize};

use super::{ExecutorError, ScriptExecutor};
use crate::numerics::nelder_mead;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizePulseParams {
    /// Starting point; `None` reads the current config values.
    pub initial_amplitude: Option<f64>,
    pub initial_beta: Option<f64>,
    /// Initial simplex steps for (amplitude, beta).
    pub amplitude_step: f64,
    pub beta_step: f64,
    pub max_evals: usize,
    pub tol: f64,
    pub rb_depths: Vec<u32>,
    pub rb_sequences_per_depth: u32,
    pub rb_nshots: u32,
    pub rb_seed: u64,
}

impl Default for OptimizePulseParams {
    fn default() -> Self {
        OptimizePulseParams {
            initial_amplitude: None,
            initial_beta: None,
            amplitude_step: -0.03,
            beta_step: -0.06,
            max_evals: 25,
            tol: 1e-5,
            rb_depths: vec![1, 60, 160, 300],
            rb_sequences_per_depth: 10,
            rb_nshots: 2048,
            rb_seed: 0xb0b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PulseOptimization {
    pub best_amplitude: f64,
    pub best_beta: f64,
    pub initial_objective: f64,
    pub final_objective: f64,
    /// `(amplitude, beta, objective)` for every evaluation, in order.
    pub history: Vec<(f64, f64, f64)>,
    pub evaluations: usize,
}

/// Search pulse amplitude and DRAG beta to maximize the RB decay parameter;
/// the winning point is applied to the executor's config.
pub fn optimize_pulse(
    executor: &mut ScriptExecutor,
    qubit: &str,
    params: &OptimizePulseParams,
) -> Result<PulseOptimization, ExecutorError> {
    if !executor.is_connected() {
        return Err(ExecutorError::NotConnected);
    }
    let qubit_id = crate::platform::QubitId::new(qubit);
    let start = {
        let cal = executor.config().qubits.get(&qubit_id).ok_or_else(|| {
            ExecutorError::Protocol(crate::protocols::ProtocolError::UnknownTarget {
                target: qubit.to_string(),
            })
        })?;
        [
            params.initial_amplitude.unwrap_or(cal.pi_pulse_amplitude),
            params.initial_beta.unwrap_or(cal.drag_beta),
        ]
    };

    let rb_params = serde_json::json!({
        "depths": params.rb_depths,
        "sequences_per_depth": params.rb_sequences_per_depth,
        "nshots": params.rb_nshots,
        "rng_seed": params.rb_seed,
    });
    let targets = vec![qubit.to_string()];

    let mut history: Vec<(f64, f64, f64)> = Vec::new();
    let outcome = {
        let history = &mut history;
        let mut objective = |x: &[f64]| -> f64 {
            let amplitude = x[0].clamp(0.0, 1.0);
            let beta = if x[1].is_finite() { x[1] } else { 0.0 };
            let applied = executor
                .set_config_value(
                    &format!("qubits.{qubit}.pi_pulse_amplitude"),
                    serde_json::json!(amplitude),
                )
                .and_then(|_| {
                    executor.set_config_value(
                        &format!("qubits.{qubit}.drag_beta"),
                        serde_json::json!(beta),
                    )
                });
            if applied.is_err() {
                history.push((amplitude, beta, 1.0));
                return 1.0;
            }
            // RB failures count as the worst objective instead of aborting.
            let value = match executor.run_protocol_with_id(
                "optimize-pulse-rb",
                "standard_rb",
                Some(&targets),
                rb_params.clone(),
            ) {
                Ok(results) => results
                    .per_target
                    .get(qubit)
                    .and_then(|t| t.value("decay_p"))
                    .map(|p| 1.0 - p)
                    .unwrap_or(1.0),
                Err(_) => 1.0,
            };
            history.push((amplitude, beta, value));
            value
        };
        let step = [params.amplitude_step, params.beta_step];
        nelder_mead(&mut objective, &start, &step, params.max_evals, params.tol)
            .map_err(|e| ExecutorError::Optimization(e.to_string()))?
    };

    let best_amplitude = outcome.x_best[0].clamp(0.0, 1.0);
    let best_beta = outcome.x_best[1];
    executor.set_config_value(
        &format!("qubits.{qubit}.pi_pulse_amplitude"),
        serde_json::json!(best_amplitude),
    )?;
    executor.set_config_value(
        &format!("qubits.{qubit}.drag_beta"),
        serde_json::json!(best_beta),
    )?;

    let initial_objective = history.first().map(|h| h.2).unwrap_or(1.0);
    Ok(PulseOptimization {
        best_amplitude,
        best_beta,
        initial_objective,
        final_objective: outcome.f_best,
        history,
        evaluations: outcome.evaluations,
    })
}
