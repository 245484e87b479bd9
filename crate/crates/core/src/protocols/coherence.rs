//! Time-domain coherence protocols: Ramsey detuning/T2* and exponential
//! relaxation (T1, echo).

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::*;
use crate::device::ExperimentSpec;
use crate::numerics::{self, canonical_oscillation, levenberg_marquardt, oscillation_seed};
use crate::report::svg::{self, Series, SeriesStyle};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyParams {
    pub delay_min_ns: f64,
    pub delay_max_ns: f64,
    pub delay_step_ns: f64,
    pub artificial_detuning_hz: f64,
    pub nshots: u32,
}

impl Default for RamseyParams {
    fn default() -> Self {
        RamseyParams {
            delay_min_ns: 10.0,
            delay_max_ns: 3010.0,
            delay_step_ns: 50.0,
            artificial_detuning_hz: 2.0e6,
            nshots: 1024,
        }
    }
}

pub struct Ramsey;

impl Routine for Ramsey {
    fn name(&self) -> &'static str {
        "ramsey"
    }

    fn default_params(&self) -> Value {
        resolved_params(&RamseyParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<RamseyParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["drive_frequency_hz", "t2_ramsey_ns"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: RamseyParams = parse_params(self.name(), params)?;
        // The artificial detuning must exceed the expected drive-frequency
        // error so the fitted beat sits on the positive branch.
        if !p.artificial_detuning_hz.is_finite() || p.artificial_detuning_hz <= 0.0 {
            return Err(ProtocolError::Precondition(
                "artificial_detuning_hz must be positive".into(),
            ));
        }
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let delays = sweep_range(p.delay_min_ns, p.delay_max_ns, p.delay_step_ns)?;
            let mut set = device.simulate(&ExperimentSpec::Ramsey {
                qubit,
                delays_ns: delays,
                drive_frequency_hz: cal.drive_frequency_hz,
                artificial_detuning_hz: p.artificial_detuning_hz,
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
                let delays = extract_axis(set, "delay_ns")?;
                let probs = extract_probabilities(set)?.probs;
                let drive = set
                    .meta_f64("drive_frequency_hz")
                    .ok_or("missing drive_frequency_hz metadata")?;
                let artificial = set
                    .meta_f64("artificial_detuning_hz")
                    .ok_or("missing artificial_detuning_hz metadata")?;
                let span = delays[delays.len() - 1] - delays[0];
                let seed = oscillation_seed(&delays, &probs).map_err(|e| e.to_string())?;
                let model = numerics::damped_cos().with_bounds(vec![
                    (f64::NEG_INFINITY, f64::INFINITY),
                    (1e-9, f64::INFINITY),
                    (f64::NEG_INFINITY, f64::INFINITY),
                    (1.0, f64::INFINITY),
                    (f64::NEG_INFINITY, f64::INFINITY),
                ]);
                let mut best: Option<crate::numerics::FitResult> = None;
                for f_cand in [seed.frequency, artificial * 1e-9, seed.frequency * 0.5] {
                    if !f_cand.is_finite() || f_cand <= 0.0 {
                        continue;
                    }
                    let x0 = [
                        seed.amplitude.max(0.05),
                        f_cand,
                        seed.phase,
                        span,
                        seed.offset,
                    ];
                    if let Ok(fit) = levenberg_marquardt(&model, &x0, &delays, &probs) {
                        if best.as_ref().is_none_or(|b| fit.cost < b.cost) {
                            best = Some(fit);
                        }
                    }
                }
                let mut fit = best.ok_or("all damped-cosine fits failed")?;
                let (a, f, phi) =
                    canonical_oscillation(fit.params[0], fit.params[1], fit.params[2]);
                fit.params[0] = a;
                fit.params[1] = f;
                fit.params[2] = phi;
                let f_fit_hz = f * 1e9;
                let t2 = fit.params[3];
                let corrected_drive = drive + artificial - f_fit_hz;
                let mut quality = FitQuality::Good;
                let mut message = None;
                if !fit.converged {
                    quality = FitQuality::Failed;
                    message = Some("damped cosine fit did not converge".into());
                } else if stderr_poor(fit.stderr[1] * 1e9, f_fit_hz.max(0.25e9 / span)) {
                    quality = FitQuality::Poor;
                    message = Some("beat frequency uncertainty above 20%".into());
                }
                let mut values = std::collections::BTreeMap::new();
                values.insert("fitted_frequency_hz".into(), f_fit_hz);
                values.insert("t2_ramsey_ns".into(), t2);
                values.insert("drive_frequency_hz".into(), corrected_drive);
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

    fn update(&self, results: &Results, config: &PlatformConfig) -> Vec<ConfigUpdate> {
        let mut updates = Vec::new();
        for (target, tr) in &results.per_target {
            if tr.quality == FitQuality::Failed {
                continue;
            }
            if let Some(f) = tr.value("drive_frequency_hz") {
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.drive_frequency_hz"),
                    f,
                ));
            }
            if let Some(t2) = tr.value("t2_ramsey_ns") {
                // Keep the relaxation bound satisfied for noisy fits.
                let cap = config
                    .qubits
                    .get(&QubitId::new(target))
                    .and_then(|c| c.t1_ns)
                    .map(|t1| 2.0 * t1)
                    .unwrap_or(f64::INFINITY);
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.t2_ramsey_ns"),
                    t2.min(cap),
                ));
            }
        }
        updates
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(xs), Ok(extraction)) =
                (extract_axis(set, "delay_ns"), extract_probabilities(set))
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
                if let (Some(fit), true) = (&tr.fit, tr.quality != FitQuality::Failed) {
                    if fit.params.len() == 5 {
                        let pts: Vec<(f64, f64)> = xs
                            .iter()
                            .map(|&x| (x, numerics::damped_cos().eval(&fit.params, x)))
                            .collect();
                        series.push(
                            Series::new(format!("{target} fit"), 1, SeriesStyle::Line)
                                .with_points(pts),
                        );
                    }
                }
            }
            figures.push(svg::xy_figure(
                &format!("Ramsey - {target}"),
                "delay (ns)",
                "P(1)",
                &series,
            ));
        }
        vec![SectionContent {
            title: "Ramsey".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayKind {
    T1,
    Echo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoherenceDecayParams {
    pub kind: DecayKind,
    pub delay_min_ns: f64,
    pub delay_max_ns: f64,
    pub delay_step_ns: f64,
    pub nshots: u32,
}

impl Default for CoherenceDecayParams {
    fn default() -> Self {
        CoherenceDecayParams {
            kind: DecayKind::T1,
            delay_min_ns: 100.0,
            delay_max_ns: 40_100.0,
            delay_step_ns: 500.0,
            nshots: 1024,
        }
    }
}

pub struct CoherenceDecay;

impl Routine for CoherenceDecay {
    fn name(&self) -> &'static str {
        "coherence_decay"
    }

    fn default_params(&self) -> Value {
        resolved_params(&CoherenceDecayParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<CoherenceDecayParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["t1_ns", "t2_echo_ns"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: CoherenceDecayParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let delays = sweep_range(p.delay_min_ns, p.delay_max_ns, p.delay_step_ns)?;
            let spec = match p.kind {
                DecayKind::T1 => ExperimentSpec::T1 {
                    qubit,
                    delays_ns: delays,
                    readout_frequency_hz: cal.readout_frequency_hz,
                    nshots: p.nshots,
                },
                DecayKind::Echo => ExperimentSpec::Echo {
                    qubit,
                    delays_ns: delays,
                    readout_frequency_hz: cal.readout_frequency_hz,
                    nshots: p.nshots,
                },
            };
            let mut set = device.simulate(&spec)?;
            stamp_classifier(&mut set, cal.classifier.as_ref());
            set.set_meta("kind", match p.kind {
                DecayKind::T1 => "t1",
                DecayKind::Echo => "echo",
            });
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let kind = set
                    .metadata
                    .get("kind")
                    .and_then(|m| m.as_str())
                    .unwrap_or("t1")
                    .to_string();
                let delays = extract_axis(set, "delay_ns")?;
                let probs = extract_probabilities(set)?.probs;
                let tail_n = (probs.len() / 10).max(2);
                let offset_seed =
                    probs[probs.len() - tail_n..].iter().sum::<f64>() / tail_n as f64;
                let amp_seed = probs[0] - offset_seed;
                // Seed the decay constant from the 1/e crossing of the range.
                let threshold = offset_seed + amp_seed / std::f64::consts::E;
                let span = delays[delays.len() - 1] - delays[0];
                let t_seed = delays
                    .iter()
                    .zip(&probs)
                    .find(|(_, &p)| {
                        if amp_seed >= 0.0 {
                            p <= threshold
                        } else {
                            p >= threshold
                        }
                    })
                    .map(|(&d, _)| d.max(delays[1] - delays[0]))
                    .unwrap_or(span / 2.0);
                let model = numerics::exp_decay().with_bounds(vec![
                    (f64::NEG_INFINITY, f64::INFINITY),
                    (1e-3, f64::INFINITY),
                    (f64::NEG_INFINITY, f64::INFINITY),
                ]);
                let fit = levenberg_marquardt(
                    &model,
                    &[amp_seed, t_seed, offset_seed],
                    &delays,
                    &probs,
                )
                .map_err(|e| e.to_string())?;
                let t_fit = fit.params[1];
                let mut quality = FitQuality::Good;
                let mut message = None;
                if !fit.converged {
                    quality = FitQuality::Failed;
                    message = Some("exponential fit did not converge".into());
                } else if t_fit > 1.5 * span {
                    quality = FitQuality::Poor;
                    message = Some("delays span well under one decay constant".into());
                } else if stderr_poor(fit.stderr[1], t_fit) {
                    quality = FitQuality::Poor;
                    message = Some("decay constant uncertainty above 20%".into());
                }
                let key = if kind == "echo" { "t2_echo_ns" } else { "t1_ns" };
                let mut values = std::collections::BTreeMap::new();
                values.insert(key.into(), t_fit);
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

    fn update(&self, results: &Results, config: &PlatformConfig) -> Vec<ConfigUpdate> {
        let mut updates = Vec::new();
        for (target, tr) in &results.per_target {
            if tr.quality == FitQuality::Failed {
                continue;
            }
            let cal = config.qubits.get(&QubitId::new(target));
            if let Some(t1) = tr.value("t1_ns") {
                // A lower T1 must not strand existing T2 entries above the
                // relaxation bound.
                let floor = cal
                    .map(|c| {
                        0.5 * c
                            .t2_ramsey_ns
                            .unwrap_or(0.0)
                            .max(c.t2_echo_ns.unwrap_or(0.0))
                    })
                    .unwrap_or(0.0);
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.t1_ns"),
                    t1.max(floor),
                ));
            }
            if let Some(t2e) = tr.value("t2_echo_ns") {
                let cap = cal
                    .and_then(|c| c.t1_ns)
                    .map(|t1| 2.0 * t1)
                    .unwrap_or(f64::INFINITY);
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.t2_echo_ns"),
                    t2e.min(cap),
                ));
            }
        }
        updates
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(xs), Ok(extraction)) =
                (extract_axis(set, "delay_ns"), extract_probabilities(set))
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
                if let (Some(fit), true) = (&tr.fit, tr.quality != FitQuality::Failed) {
                    if fit.params.len() == 3 {
                        let pts: Vec<(f64, f64)> = xs
                            .iter()
                            .map(|&x| (x, numerics::exp_decay().eval(&fit.params, x)))
                            .collect();
                        series.push(
                            Series::new(format!("{target} fit"), 1, SeriesStyle::Line)
                                .with_points(pts),
                        );
                    }
                }
            }
            figures.push(svg::xy_figure(
                &format!("Coherence decay - {target}"),
                "delay (ns)",
                "P(1)",
                &series,
            ));
        }
        vec![SectionContent {
            title: "Coherence decay".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}
