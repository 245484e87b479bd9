//! Drive-pulse calibration: Rabi sweeps, flipping amplification and DRAG
//! tuning.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::*;
use crate::device::ExperimentSpec;
use crate::numerics::{
    self, canonical_oscillation, levenberg_marquardt, oscillation_seed, FitResult,
};
use crate::report::svg::{self, Series, SeriesStyle};

/// Cosine fit with a small deterministic multi-start over frequency
/// candidates derived from the DFT seed; returns the lowest-cost fit with
/// canonicalized (positive amplitude/frequency) parameters.
pub(crate) fn fit_cosine_multistart(
    xs: &[f64],
    ys: &[f64],
    extra_candidates: &[f64],
) -> Result<FitResult, String> {
    let seed = oscillation_seed(xs, ys).map_err(|e| e.to_string())?;
    let span = xs[xs.len() - 1] - xs[0];
    let mut candidates = vec![
        seed.frequency,
        seed.frequency * 0.5,
        seed.frequency * 0.25,
        seed.frequency * 2.0,
        0.25 / span,
    ];
    candidates.extend_from_slice(extra_candidates);
    let model = numerics::cosine();
    let mut best: Option<FitResult> = None;
    for f in candidates {
        if !f.is_finite() || f <= 0.0 {
            continue;
        }
        let amp = if seed.amplitude > 1e-12 {
            seed.amplitude
        } else {
            0.1
        };
        let x0 = [amp, f, seed.phase, seed.offset];
        if let Ok(fit) = levenberg_marquardt(&model, &x0, xs, ys) {
            if best.as_ref().is_none_or(|b| fit.cost < b.cost) {
                best = Some(fit);
            }
        }
    }
    let mut fit = best.ok_or("all cosine fits failed")?;
    let (a, f, phi) = canonical_oscillation(fit.params[0], fit.params[1], fit.params[2]);
    fit.params[0] = a;
    fit.params[1] = f;
    fit.params[2] = phi;
    Ok(fit)
}

fn probability_section(
    title: &str,
    x_label: &str,
    axis_name: &str,
    data: &Data,
    results: &Results,
    curve: impl Fn(&TargetResult, f64) -> Option<f64>,
) -> SectionContent {
    let mut figures = Vec::new();
    for (target, set) in &data.per_target {
        let (Ok(xs), Ok(extraction)) = (extract_axis(set, axis_name), extract_probabilities(set))
        else {
            continue;
        };
        let mut series = vec![Series::new(
            format!("{target} data"),
            0,
            SeriesStyle::Scatter,
        )
        .with_points(xs.iter().copied().zip(extraction.probs.iter().copied()).collect())];
        if let Some(tr) = results.per_target.get(target) {
            if tr.quality != FitQuality::Failed {
                let pts: Vec<(f64, f64)> = xs
                    .iter()
                    .filter_map(|&x| curve(tr, x).map(|y| (x, y)))
                    .collect();
                if !pts.is_empty() {
                    series.push(
                        Series::new(format!("{target} fit"), 1, SeriesStyle::Line)
                            .with_points(pts),
                    );
                }
            }
        }
        figures.push(svg::xy_figure(
            &format!("{title} - {target}"),
            x_label,
            "P(1)",
            &series,
        ));
    }
    SectionContent {
        title: title.to_string(),
        figures,
        tables: vec![results_table(results)],
        raw_html: None,
    }
}

fn cosine_curve(tr: &TargetResult, x: f64) -> Option<f64> {
    let fit = tr.fit.as_ref()?;
    if fit.params.len() != 4 {
        return None;
    }
    Some(numerics::cosine().eval(&fit.params, x))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RabiMode {
    Amplitude,
    Duration,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiParams {
    pub mode: RabiMode,
    pub sweep_min: f64,
    pub sweep_max: f64,
    pub sweep_step: f64,
    pub nshots: u32,
}

impl Default for RabiParams {
    fn default() -> Self {
        RabiParams {
            mode: RabiMode::Amplitude,
            sweep_min: 0.0,
            sweep_max: 1.0,
            sweep_step: 0.02,
            nshots: 1024,
        }
    }
}

pub struct Rabi;

impl Routine for Rabi {
    fn name(&self) -> &'static str {
        "rabi"
    }

    fn default_params(&self) -> Value {
        resolved_params(&RabiParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<RabiParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["pi_pulse_amplitude", "pi_pulse_duration_ns"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: RabiParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let sweep = match p.mode {
                // An exactly zero drive is a degenerate point for duration
                // sweeps; amplitude sweeps may include it.
                RabiMode::Amplitude => sweep_range(p.sweep_min, p.sweep_max.min(1.0), p.sweep_step)?,
                RabiMode::Duration => {
                    sweep_range(p.sweep_min.max(1.0), p.sweep_max, p.sweep_step)?
                }
            };
            let spec = match p.mode {
                RabiMode::Amplitude => ExperimentSpec::RabiAmplitude {
                    qubit,
                    amplitudes: sweep,
                    drive_frequency_hz: cal.drive_frequency_hz,
                    readout_frequency_hz: cal.readout_frequency_hz,
                    nshots: p.nshots,
                },
                RabiMode::Duration => ExperimentSpec::RabiDuration {
                    qubit,
                    durations_ns: sweep,
                    drive_amplitude: cal.pi_pulse_amplitude,
                    drive_frequency_hz: cal.drive_frequency_hz,
                    readout_frequency_hz: cal.readout_frequency_hz,
                    nshots: p.nshots,
                },
            };
            let mut set = device.simulate(&spec)?;
            stamp_classifier(&mut set, cal.classifier.as_ref());
            set.set_meta("mode", match p.mode {
                RabiMode::Amplitude => "amplitude",
                RabiMode::Duration => "duration",
            });
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let mode = set
                    .metadata
                    .get("mode")
                    .and_then(|m| m.as_str())
                    .unwrap_or("amplitude")
                    .to_string();
                let axis_name = if mode == "duration" { "duration_ns" } else { "amplitude" };
                let xs = extract_axis(set, axis_name)?;
                let extraction = extract_probabilities(set)?;
                let mut probs = extraction.probs;
                // An uncalibrated readout fixes scale but not orientation;
                // a Rabi trace starts near the ground state.
                if extraction.uncalibrated && probs[0] > 0.5 {
                    for p in &mut probs {
                        *p = 1.0 - *p;
                    }
                }
                let fit = fit_cosine_multistart(&xs, &probs, &[])?;
                let frequency = fit.params[1];
                let half_period = 1.0 / (2.0 * frequency);
                let span = xs[xs.len() - 1] - xs[0];
                let mut values = std::collections::BTreeMap::new();
                let mut quality = FitQuality::Good;
                let mut message = extraction
                    .uncalibrated
                    .then(|| "uncalibrated readout: mean-IQ projection".to_string());
                if !fit.converged {
                    quality = FitQuality::Failed;
                    message = Some("cosine fit did not converge".into());
                } else if half_period > span {
                    quality = FitQuality::Poor;
                    message = Some("sweep covers less than half a Rabi period".into());
                } else if mode == "amplitude" && half_period > 1.0 {
                    quality = FitQuality::Poor;
                    message = Some("fitted pi amplitude exceeds the unit drive range".into());
                } else {
                    let key = if mode == "duration" {
                        "pi_pulse_duration_ns"
                    } else {
                        "pi_pulse_amplitude"
                    };
                    values.insert(key.into(), half_period);
                }
                values.insert("rabi_frequency".into(), frequency);
                values.insert("contrast".into(), fit.params[0]);
                Ok(TargetResult {
                    values,
                    quality,
                    message,
                    fit: Some(FitDiag::from(&fit)),
                })
            })();
            results
                .per_target
                .insert(target.clone(), outcome.unwrap_or_else(TargetResult::failed));
        }
        results
    }

    fn update(&self, results: &Results, _config: &PlatformConfig) -> Vec<ConfigUpdate> {
        let mut updates = Vec::new();
        for (target, tr) in &results.per_target {
            if tr.quality == FitQuality::Failed {
                continue;
            }
            if let Some(a) = tr.value("pi_pulse_amplitude") {
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.pi_pulse_amplitude"),
                    a.clamp(0.0, 1.0),
                ));
            }
            if let Some(t) = tr.value("pi_pulse_duration_ns") {
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.pi_pulse_duration_ns"),
                    t,
                ));
            }
        }
        updates
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let duration = data
            .per_target
            .values()
            .next()
            .and_then(|s| s.metadata.get("mode"))
            .and_then(|m| m.as_str())
            == Some("duration");
        let (x_label, axis) = if duration {
            ("pulse duration (ns)", "duration_ns")
        } else {
            ("drive amplitude", "amplitude")
        };
        vec![probability_section(
            "Rabi",
            x_label,
            axis,
            data,
            results,
            cosine_curve,
        )]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlippingParams {
    pub n_flips_max: u32,
    pub n_flips_step: u32,
    pub nshots: u32,
}

impl Default for FlippingParams {
    fn default() -> Self {
        FlippingParams {
            n_flips_max: 40,
            n_flips_step: 1,
            nshots: 1024,
        }
    }
}

pub struct Flipping;

impl Routine for Flipping {
    fn name(&self) -> &'static str {
        "flipping"
    }

    fn default_params(&self) -> Value {
        resolved_params(&FlippingParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<FlippingParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["pi_pulse_amplitude"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: FlippingParams = parse_params(self.name(), params)?;
        if p.n_flips_step == 0 || p.n_flips_max == 0 {
            return Err(ProtocolError::Precondition(
                "n_flips_max and n_flips_step must be positive".into(),
            ));
        }
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let n_flips: Vec<u32> = (0..=p.n_flips_max).step_by(p.n_flips_step as usize).collect();
            let mut set = device.simulate(&ExperimentSpec::Flipping {
                qubit,
                n_flips,
                set_amplitude: cal.pi_pulse_amplitude,
                readout_frequency_hz: cal.readout_frequency_hz,
                nshots: p.nshots,
            })?;
            stamp_classifier(&mut set, cal.classifier.as_ref());
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let ns = extract_axis(set, "n_flips")?;
                let set_amplitude = set
                    .meta_f64("set_amplitude")
                    .ok_or("missing set_amplitude metadata")?;
                let probs = extract_probabilities(set)?.probs;
                let mut values = std::collections::BTreeMap::new();
                // A flat trace means the oscillation is below resolution:
                // the amplitude error is indistinguishable from zero.
                let range = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                    - probs.iter().copied().fold(f64::INFINITY, f64::min);
                if range < 0.08 {
                    values.insert("epsilon".into(), 0.0);
                    values.insert("pi_pulse_amplitude".into(), set_amplitude);
                    return Ok(TargetResult {
                        values,
                        quality: FitQuality::Good,
                        message: Some("flat trace: amplitude error below resolution".into()),
                        fit: None,
                    });
                }
                let fit = fit_cosine_multistart(&ns, &probs, &[0.005, 0.01, 0.02, 0.05])?;
                if !fit.converged {
                    return Ok(TargetResult {
                        values: values.clone(),
                        quality: FitQuality::Failed,
                        message: Some("flipping oscillation fit did not converge".into()),
                        fit: Some(FitDiag::from(&fit)),
                    });
                }
                // P(N) = 0.5 + A cos(2 pi f N + phi): a positive amplitude
                // error puts the phase near -pi/2, a negative one near +pi/2.
                let frequency = fit.params[1];
                let phase = fit.params[2];
                let epsilon = if phase < 0.0 { frequency } else { -frequency };
                let corrected = set_amplitude / (1.0 + epsilon);
                values.insert("epsilon".into(), epsilon);
                values.insert("pi_pulse_amplitude".into(), corrected.clamp(0.0, 1.0));
                let quality = if stderr_poor(fit.stderr[1], frequency.abs().max(1e-3)) {
                    FitQuality::Poor
                } else {
                    FitQuality::Good
                };
                Ok(TargetResult {
                    values,
                    quality,
                    message: None,
                    fit: Some(FitDiag::from(&fit)),
                })
            })();
            results
                .per_target
                .insert(target.clone(), outcome.unwrap_or_else(TargetResult::failed));
        }
        results
    }

    fn update(&self, results: &Results, _config: &PlatformConfig) -> Vec<ConfigUpdate> {
        results
            .per_target
            .iter()
            .filter(|(_, tr)| tr.quality != FitQuality::Failed)
            .filter_map(|(target, tr)| {
                tr.value("pi_pulse_amplitude").map(|a| {
                    ConfigUpdate::new(format!("qubits.{target}.pi_pulse_amplitude"), a)
                })
            })
            .collect()
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        vec![probability_section(
            "Flipping",
            "number of flips",
            "n_flips",
            data,
            results,
            cosine_curve,
        )]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DragTuningParams {
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_step: f64,
    pub repetitions: u32,
    pub nshots: u32,
}

impl Default for DragTuningParams {
    fn default() -> Self {
        DragTuningParams {
            beta_min: -0.15,
            beta_max: 0.40,
            beta_step: 0.01,
            repetitions: 3,
            nshots: 1024,
        }
    }
}

pub struct DragTuning;

impl Routine for DragTuning {
    fn name(&self) -> &'static str {
        "drag_tuning"
    }

    fn default_params(&self) -> Value {
        resolved_params(&DragTuningParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<DragTuningParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["drag_beta"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: DragTuningParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let betas = sweep_range(p.beta_min, p.beta_max, p.beta_step)?;
            let mut set = device.simulate(&ExperimentSpec::DragSweep {
                qubit,
                betas,
                repetitions: p.repetitions,
                readout_frequency_hz: cal.readout_frequency_hz,
                nshots: p.nshots,
            })?;
            stamp_classifier(&mut set, cal.classifier.as_ref());
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let betas = extract_axis(set, "beta")?;
                let probs = extract_probabilities(set)?.probs;
                let min_idx = probs
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                let span = betas[betas.len() - 1] - betas[0];
                let edge = probs[0].max(probs[probs.len() - 1]);
                let curvature_seed = (edge - probs[min_idx]).max(1e-6) / (span / 2.0).powi(2);
                let seed = [curvature_seed, betas[min_idx], probs[min_idx]];
                let model = numerics::parabola();
                let fit =
                    levenberg_marquardt(&model, &seed, &betas, &probs).map_err(|e| e.to_string())?;
                let vertex = fit.params[1];
                let mut values = std::collections::BTreeMap::new();
                let mut quality = FitQuality::Good;
                let mut message = None;
                if !fit.converged {
                    quality = FitQuality::Failed;
                    message = Some("parabola fit did not converge".into());
                } else if vertex < betas[0] || vertex > betas[betas.len() - 1] {
                    quality = FitQuality::Poor;
                    message = Some("fitted optimum outside the swept beta range".into());
                } else {
                    values.insert("drag_beta".into(), vertex);
                    if stderr_poor(fit.stderr[1], span / 4.0) {
                        quality = FitQuality::Poor;
                        message = Some("vertex uncertainty above 20% of the sweep scale".into());
                    }
                }
                values.insert("curvature".into(), fit.params[0]);
                Ok(TargetResult {
                    values,
                    quality,
                    message,
                    fit: Some(FitDiag::from(&fit)),
                })
            })();
            results
                .per_target
                .insert(target.clone(), outcome.unwrap_or_else(TargetResult::failed));
        }
        results
    }

    fn update(&self, results: &Results, _config: &PlatformConfig) -> Vec<ConfigUpdate> {
        results
            .per_target
            .iter()
            .filter(|(_, tr)| tr.quality != FitQuality::Failed)
            .filter_map(|(target, tr)| {
                tr.value("drag_beta")
                    .map(|b| ConfigUpdate::new(format!("qubits.{target}.drag_beta"), b))
            })
            .collect()
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        vec![probability_section(
            "DRAG tuning",
            "DRAG beta",
            "beta",
            data,
            results,
            |tr, x| {
                let fit = tr.fit.as_ref()?;
                if fit.params.len() != 3 {
                    return None;
                }
                Some(numerics::parabola().eval(&fit.params, x))
            },
        )]
    }
}
