//! Frequency-domain protocols: resonator and qubit spectroscopies, punchout,
//! flux dependence and readout-frequency optimization.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::*;
use crate::device::ExperimentSpec;
use crate::numerics::{self, levenberg_marquardt, ModelSpec};
use crate::report::svg::{self, Series, SeriesStyle};

/// Lorentzian feature fit against |IQ|; `peak` selects a maximum (qubit
/// line) versus a minimum (resonator dip).
fn fit_lorentzian_feature(
    freqs: &[f64],
    mags: &[f64],
    peak: bool,
) -> Result<(crate::numerics::FitResult, f64), String> {
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi.is_finite() && lo.is_finite()) {
        return Err("non-finite magnitudes".into());
    }
    if hi - lo < 0.05 * hi.abs().max(1e-12) {
        return Err("no feature: signal is flat".into());
    }
    let span = freqs[freqs.len() - 1] - freqs[0];
    let idx = if peak {
        mags.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
    } else {
        mags.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
    };
    let edge_mean = 0.5 * (mags[0] + mags[mags.len() - 1]);
    let amp_seed = mags[idx] - edge_mean;
    let seed = [amp_seed, freqs[idx], span / 10.0, edge_mean];
    let model = models_lorentzian_bounded(span);
    let fit = levenberg_marquardt(&model, &seed, freqs, mags).map_err(|e| e.to_string())?;
    // A feature buried in the residual noise is no feature: require the
    // fitted contrast to clear five residual standard deviations.
    if mags.len() > 4 {
        let sigma = (fit.cost / (mags.len() - 4) as f64).sqrt();
        if fit.params[0].abs() < 5.0 * sigma {
            return Err("no feature: fitted contrast within the noise".into());
        }
    }
    let f0 = fit.params[1];
    Ok((fit, f0))
}

fn models_lorentzian_bounded(span: f64) -> ModelSpec {
    numerics::lorentzian().with_bounds(vec![
        (f64::NEG_INFINITY, f64::INFINITY),
        (f64::NEG_INFINITY, f64::INFINITY),
        (1e-12, 4.0 * span),
        (f64::NEG_INFINITY, f64::INFINITY),
    ])
}

fn feature_quality(
    fit: &crate::numerics::FitResult,
    f0: f64,
    freqs: &[f64],
) -> (FitQuality, Option<String>) {
    if !fit.converged || !f0.is_finite() {
        return (FitQuality::Failed, Some("fit did not converge".into()));
    }
    let step = freqs[1] - freqs[0];
    let (lo, hi) = (freqs[0], freqs[freqs.len() - 1]);
    if f0 <= lo + step || f0 >= hi - step {
        return (
            FitQuality::Poor,
            Some("fitted feature at the sweep edge".into()),
        );
    }
    let width = fit.params[2].abs();
    if stderr_poor(fit.stderr[1], width) {
        return (
            FitQuality::Poor,
            Some("center uncertainty above 20% of the linewidth".into()),
        );
    }
    (FitQuality::Good, None)
}

fn magnitude_section(
    title: &str,
    x_label: &str,
    data: &Data,
    results: &Results,
    fitted_curve: impl Fn(&TargetResult, f64) -> Option<f64>,
) -> SectionContent {
    let mut figures = Vec::new();
    for (target, set) in &data.per_target {
        let (Ok(freqs), Ok(mags)) = (
            extract_axis(set, "frequency_hz"),
            extract_magnitude(set, "signal"),
        ) else {
            continue;
        };
        let mut series = vec![Series::new(
            format!("{target} data"),
            0,
            SeriesStyle::Scatter,
        )
        .with_points(freqs.iter().copied().zip(mags.iter().copied()).collect())];
        if let Some(tr) = results.per_target.get(target) {
            if tr.quality != FitQuality::Failed {
                let curve: Vec<(f64, f64)> = freqs
                    .iter()
                    .filter_map(|&f| fitted_curve(tr, f).map(|y| (f, y)))
                    .collect();
                if !curve.is_empty() {
                    series.push(
                        Series::new(format!("{target} fit"), 1, SeriesStyle::Line)
                            .with_points(curve),
                    );
                }
            }
        }
        figures.push(svg::xy_figure(
            &format!("{title} - {target}"),
            x_label,
            "|IQ| (V)",
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

fn lorentzian_value(tr: &TargetResult, f: f64) -> Option<f64> {
    let fit = tr.fit.as_ref()?;
    if fit.params.len() != 4 {
        return None;
    }
    Some(numerics::lorentzian().eval(&fit.params, f))
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonatorSpectroscopyParams {
    pub freq_width_hz: f64,
    pub freq_step_hz: f64,
    pub nshots: u32,
    pub prepared_state: u8,
}

impl Default for ResonatorSpectroscopyParams {
    fn default() -> Self {
        ResonatorSpectroscopyParams {
            freq_width_hz: 6.0e6,
            freq_step_hz: 0.1e6,
            nshots: 1024,
            prepared_state: 0,
        }
    }
}

pub struct ResonatorSpectroscopy;

impl Routine for ResonatorSpectroscopy {
    fn name(&self) -> &'static str {
        "resonator_spectroscopy"
    }

    fn default_params(&self) -> Value {
        resolved_params(&ResonatorSpectroscopyParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<ResonatorSpectroscopyParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["readout_frequency_hz"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: ResonatorSpectroscopyParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let freqs = sweep_around(cal.readout_frequency_hz, p.freq_width_hz, p.freq_step_hz)?;
            let set = device.simulate(&ExperimentSpec::ReadoutSweep {
                qubit,
                frequencies_hz: freqs,
                readout_amplitude: cal.readout_amplitude,
                prepared_state: p.prepared_state,
                nshots: p.nshots,
            })?;
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let freqs = extract_axis(set, "frequency_hz")?;
                let mags = extract_magnitude(set, "signal")?;
                let (fit, f0) = fit_lorentzian_feature(&freqs, &mags, false)?;
                let (quality, message) = feature_quality(&fit, f0, &freqs);
                let mut values = std::collections::BTreeMap::new();
                values.insert("readout_frequency_hz".into(), f0);
                values.insert("linewidth_hz".into(), fit.params[2].abs());
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
                tr.value("readout_frequency_hz").map(|f| {
                    ConfigUpdate::new(format!("qubits.{target}.readout_frequency_hz"), f)
                })
            })
            .collect()
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        vec![magnitude_section(
            "Resonator spectroscopy",
            "readout frequency (Hz)",
            data,
            results,
            lorentzian_value,
        )]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QubitSpectroscopyParams {
    pub freq_width_hz: f64,
    pub freq_step_hz: f64,
    pub nshots: u32,
}

impl Default for QubitSpectroscopyParams {
    fn default() -> Self {
        QubitSpectroscopyParams {
            freq_width_hz: 10.0e6,
            freq_step_hz: 0.1e6,
            nshots: 1024,
        }
    }
}

pub struct QubitSpectroscopy;

impl Routine for QubitSpectroscopy {
    fn name(&self) -> &'static str {
        "qubit_spectroscopy"
    }

    fn default_params(&self) -> Value {
        resolved_params(&QubitSpectroscopyParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<QubitSpectroscopyParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["drive_frequency_hz"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: QubitSpectroscopyParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let freqs = sweep_around(cal.drive_frequency_hz, p.freq_width_hz, p.freq_step_hz)?;
            let set = device.simulate(&ExperimentSpec::DriveSweep {
                qubit,
                frequencies_hz: freqs,
                bias_v: cal.flux_bias_v,
                nshots: p.nshots,
            })?;
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let freqs = extract_axis(set, "frequency_hz")?;
                let mags = extract_magnitude(set, "signal")?;
                let (fit, f0) = fit_lorentzian_feature(&freqs, &mags, true)?;
                let (quality, message) = feature_quality(&fit, f0, &freqs);
                let mut values = std::collections::BTreeMap::new();
                values.insert("drive_frequency_hz".into(), f0);
                values.insert("linewidth_hz".into(), fit.params[2].abs());
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
                tr.value("drive_frequency_hz")
                    .map(|f| ConfigUpdate::new(format!("qubits.{target}.drive_frequency_hz"), f))
            })
            .collect()
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        vec![magnitude_section(
            "Qubit spectroscopy",
            "drive frequency (Hz)",
            data,
            results,
            lorentzian_value,
        )]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResonatorPunchoutParams {
    pub freq_width_hz: f64,
    pub freq_step_hz: f64,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub amplitude_step: f64,
    pub nshots: u32,
}

impl Default for ResonatorPunchoutParams {
    fn default() -> Self {
        ResonatorPunchoutParams {
            freq_width_hz: 14.0e6,
            freq_step_hz: 0.2e6,
            amplitude_min: 0.05,
            amplitude_max: 0.8,
            amplitude_step: 0.05,
            nshots: 1024,
        }
    }
}

pub struct ResonatorPunchout;

impl Routine for ResonatorPunchout {
    fn name(&self) -> &'static str {
        "resonator_punchout"
    }

    fn default_params(&self) -> Value {
        resolved_params(&ResonatorPunchoutParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<ResonatorPunchoutParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["readout_frequency_hz", "readout_amplitude"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: ResonatorPunchoutParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let freqs = sweep_around(cal.readout_frequency_hz, p.freq_width_hz, p.freq_step_hz)?;
            let amps = sweep_range(p.amplitude_min, p.amplitude_max, p.amplitude_step)?;
            let set = device.simulate(&ExperimentSpec::PunchoutSweep {
                qubit,
                frequencies_hz: freqs,
                amplitudes: amps,
                nshots: p.nshots,
            })?;
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let freqs = extract_axis(set, "frequency_hz")?;
                let amps = extract_axis(set, "amplitude")?;
                let mags = extract_magnitude(set, "signal")?;
                let nf = freqs.len();
                let step = freqs[1] - freqs[0];
                let mut dips = Vec::with_capacity(amps.len());
                for row in 0..amps.len() {
                    let col = &mags[row * nf..(row + 1) * nf];
                    let idx = col
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0;
                    dips.push(refine_extremum(&freqs, col, idx));
                }
                // The largest adjacent jump in dip position marks the
                // punchout threshold.
                let mut jump_idx = 0;
                let mut jump = -1.0;
                for i in 0..dips.len() - 1 {
                    let d = (dips[i + 1] - dips[i]).abs();
                    if d > jump {
                        jump = d;
                        jump_idx = i;
                    }
                }
                let mut values = std::collections::BTreeMap::new();
                if jump < 3.0 * step {
                    let f_dressed = dips.iter().sum::<f64>() / dips.len() as f64;
                    values.insert("readout_frequency_hz".into(), f_dressed);
                    values.insert("f_dressed_hz".into(), f_dressed);
                    return Ok(TargetResult {
                        values,
                        quality: FitQuality::Poor,
                        message: Some("single plateau: amplitude range misses the punchout threshold".into()),
                        fit: None,
                    });
                }
                let low = &dips[..=jump_idx];
                let high = &dips[jump_idx + 1..];
                let f_dressed = low.iter().sum::<f64>() / low.len() as f64;
                let f_bare = high.iter().sum::<f64>() / high.len() as f64;
                let threshold = 0.5 * (amps[jump_idx] + amps[jump_idx + 1]);
                values.insert("f_dressed_hz".into(), f_dressed);
                values.insert("f_bare_hz".into(), f_bare);
                values.insert("punchout_amplitude".into(), threshold);
                values.insert("readout_frequency_hz".into(), f_dressed);
                values.insert("readout_amplitude".into(), threshold / 2.0);
                Ok(TargetResult {
                    values,
                    quality: FitQuality::Good,
                    message: None,
                    fit: None,
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
            if let Some(f) = tr.value("readout_frequency_hz") {
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.readout_frequency_hz"),
                    f,
                ));
            }
            if let Some(a) = tr.value("readout_amplitude") {
                updates.push(ConfigUpdate::new(
                    format!("qubits.{target}.readout_amplitude"),
                    a,
                ));
            }
        }
        updates
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(freqs), Ok(amps), Ok(mags)) = (
                extract_axis(set, "frequency_hz"),
                extract_axis(set, "amplitude"),
                extract_magnitude(set, "signal"),
            ) else {
                continue;
            };
            figures.push(svg::heatmap_figure(
                &format!("Punchout - {target}"),
                "readout frequency (Hz)",
                "readout amplitude",
                &freqs,
                &amps,
                &mags,
            ));
        }
        vec![SectionContent {
            title: "Resonator punchout".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QubitFluxDependenceParams {
    pub freq_width_hz: f64,
    pub freq_step_hz: f64,
    /// Bias sweep bounds relative to the configured sweetspot.
    pub bias_min_v: f64,
    pub bias_max_v: f64,
    pub bias_step_v: f64,
    pub nshots: u32,
}

impl Default for QubitFluxDependenceParams {
    fn default() -> Self {
        QubitFluxDependenceParams {
            freq_width_hz: 160.0e6,
            freq_step_hz: 1.0e6,
            bias_min_v: -0.06,
            bias_max_v: 0.06,
            bias_step_v: 0.006,
            nshots: 1024,
        }
    }
}

pub struct QubitFluxDependence;

impl Routine for QubitFluxDependence {
    fn name(&self) -> &'static str {
        "qubit_flux_dependence"
    }

    fn default_params(&self) -> Value {
        resolved_params(&QubitFluxDependenceParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<QubitFluxDependenceParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["sweetspot_v"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: QubitFluxDependenceParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let biases: Vec<f64> = sweep_range(p.bias_min_v, p.bias_max_v, p.bias_step_v)?
                .into_iter()
                .map(|b| b + cal.sweetspot_v)
                .collect();
            if biases.len() < 5 {
                return Err(ProtocolError::Precondition(format!(
                    "flux dependence needs at least 5 bias points, got {}",
                    biases.len()
                )));
            }
            let freqs = sweep_around(cal.drive_frequency_hz, p.freq_width_hz, p.freq_step_hz)?;
            let set = device.simulate(&ExperimentSpec::FluxMap {
                qubit,
                frequencies_hz: freqs,
                biases_v: biases,
                nshots: p.nshots,
            })?;
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let freqs = extract_axis(set, "frequency_hz")?;
                let biases = extract_axis(set, "bias_v")?;
                let mags = extract_magnitude(set, "signal")?;
                let nf = freqs.len();
                let mut peaks = Vec::with_capacity(biases.len());
                for row in 0..biases.len() {
                    let col = &mags[row * nf..(row + 1) * nf];
                    let idx = col
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0;
                    peaks.push(refine_extremum(&freqs, col, idx));
                }
                let f_max_seed = peaks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ss_idx = peaks
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                let v_ss_seed = biases[ss_idx];
                // Seed the period from the frequency drop at the sweep edge.
                let edge = if ss_idx < biases.len() / 2 {
                    biases.len() - 1
                } else {
                    0
                };
                let ratio = (peaks[edge] / f_max_seed).clamp(0.05, 0.999_999);
                let v_p_seed =
                    std::f64::consts::PI * (biases[edge] - v_ss_seed).abs() / (ratio * ratio).acos();
                let model = ModelSpec::new(3, |p: &[f64], v: f64| {
                    let phase = std::f64::consts::PI * (v - p[1]) / p[2];
                    p[0] * phase.cos().abs().sqrt()
                });
                let fit =
                    levenberg_marquardt(&model, &[f_max_seed, v_ss_seed, v_p_seed], &biases, &peaks)
                        .map_err(|e| e.to_string())?;
                let (f_max, v_ss, v_p) = (fit.params[0], fit.params[1], fit.params[2].abs());
                let mut quality = FitQuality::Good;
                let mut message = None;
                if !fit.converged {
                    quality = FitQuality::Failed;
                    message = Some("flux model fit did not converge".into());
                } else if v_ss < biases[0] || v_ss > biases[biases.len() - 1] {
                    quality = FitQuality::Poor;
                    message = Some("sweetspot outside the swept bias range".into());
                }
                let mut values = std::collections::BTreeMap::new();
                values.insert("f_q_max_hz".into(), f_max);
                values.insert("sweetspot_v".into(), v_ss);
                values.insert("v_period_v".into(), v_p);
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
                tr.value("sweetspot_v")
                    .map(|v| ConfigUpdate::new(format!("qubits.{target}.sweetspot_v"), v))
            })
            .collect()
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(freqs), Ok(biases), Ok(mags)) = (
                extract_axis(set, "frequency_hz"),
                extract_axis(set, "bias_v"),
                extract_magnitude(set, "signal"),
            ) else {
                continue;
            };
            figures.push(svg::heatmap_figure(
                &format!("Flux map - {target}"),
                "drive frequency (Hz)",
                "bias (V)",
                &freqs,
                &biases,
                &mags,
            ));
        }
        vec![SectionContent {
            title: "Qubit flux dependence".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutFrequencyOptimizationParams {
    pub freq_width_hz: f64,
    pub freq_step_hz: f64,
    pub nshots: u32,
}

impl Default for ReadoutFrequencyOptimizationParams {
    fn default() -> Self {
        ReadoutFrequencyOptimizationParams {
            freq_width_hz: 3.0e6,
            freq_step_hz: 0.05e6,
            nshots: 1024,
        }
    }
}

pub struct ReadoutFrequencyOptimization;

impl Routine for ReadoutFrequencyOptimization {
    fn name(&self) -> &'static str {
        "readout_frequency_optimization"
    }

    fn default_params(&self) -> Value {
        resolved_params(&ReadoutFrequencyOptimizationParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<ReadoutFrequencyOptimizationParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["readout_frequency_hz"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: ReadoutFrequencyOptimizationParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let freqs = sweep_around(cal.readout_frequency_hz, p.freq_width_hz, p.freq_step_hz)?;
            let mut merged = ArraySet::new();
            for state in [0u8, 1u8] {
                let set = device.simulate(&ExperimentSpec::ReadoutSweep {
                    qubit: qubit.clone(),
                    frequencies_hz: freqs.clone(),
                    readout_amplitude: cal.readout_amplitude,
                    prepared_state: state,
                    nshots: p.nshots,
                })?;
                let signal = set
                    .array("signal")
                    .and_then(|a| a.as_c64())
                    .ok_or(DeviceError::InvalidSpec("missing signal".into()))?
                    .to_vec();
                merged.insert(
                    format!("signal_state{state}"),
                    crate::device::NamedArray::c64(vec![signal.len()], signal),
                );
            }
            merged.insert(
                "frequency_hz",
                crate::device::NamedArray::f64(vec![freqs.len()], freqs.clone()),
            );
            merged.set_meta("qubit", target.as_str());
            data.per_target.insert(target.clone(), merged);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let freqs = extract_axis(set, "frequency_hz")?;
                let s0 = set
                    .array("signal_state0")
                    .and_then(|a| a.as_c64())
                    .ok_or("missing signal_state0")?;
                let s1 = set
                    .array("signal_state1")
                    .and_then(|a| a.as_c64())
                    .ok_or("missing signal_state1")?;
                let separation: Vec<f64> =
                    s0.iter().zip(s1).map(|(a, b)| (b - a).norm()).collect();
                let mean_mag =
                    s0.iter().map(|z| z.norm()).sum::<f64>() / s0.len().max(1) as f64;
                let idx = separation
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                let best = refine_extremum(&freqs, &separation, idx);
                let max_sep = separation[idx];
                let mut quality = FitQuality::Good;
                let mut message = None;
                if max_sep < 0.02 * mean_mag.max(1e-12) {
                    quality = FitQuality::Poor;
                    message = Some("state separation indistinguishable from baseline".into());
                } else if idx == 0 || idx + 1 == separation.len() {
                    quality = FitQuality::Poor;
                    message = Some("separation maximum at the sweep edge".into());
                }
                let mut values = std::collections::BTreeMap::new();
                values.insert("readout_frequency_hz".into(), best);
                values.insert("separation_v".into(), max_sep);
                Ok(TargetResult {
                    values,
                    quality,
                    message,
                    fit: None,
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
                tr.value("readout_frequency_hz").map(|f| {
                    ConfigUpdate::new(format!("qubits.{target}.readout_frequency_hz"), f)
                })
            })
            .collect()
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(freqs), Some(s0), Some(s1)) = (
                extract_axis(set, "frequency_hz"),
                set.array("signal_state0").and_then(|a| a.as_c64()),
                set.array("signal_state1").and_then(|a| a.as_c64()),
            ) else {
                continue;
            };
            let separation: Vec<(f64, f64)> = freqs
                .iter()
                .zip(s0.iter().zip(s1))
                .map(|(&f, (a, b))| (f, (b - a).norm()))
                .collect();
            figures.push(svg::xy_figure(
                &format!("Readout separation - {target}"),
                "readout frequency (Hz)",
                "|IQ1 - IQ0| (V)",
                &[Series::new("separation", 0, SeriesStyle::LineWithMarkers)
                    .with_points(separation)],
            ));
        }
        vec![SectionContent {
            title: "Readout frequency optimization".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}
