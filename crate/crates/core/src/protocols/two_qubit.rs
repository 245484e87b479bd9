//! Two-qubit gate calibration: avoided crossing, chevron, CZ phases.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::rabi::fit_cosine_multistart;
use super::*;
use crate::device::ExperimentSpec;
use crate::numerics::{self, levenberg_marquardt, wrap_phase};
use crate::report::svg::{self, Series, SeriesStyle};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvoidedCrossingParams {
    pub freq_width_hz: f64,
    pub freq_step_hz: f64,
    /// Bias sweep bounds relative to qubit A's configured sweetspot.
    pub bias_min_v: f64,
    pub bias_max_v: f64,
    pub bias_step_v: f64,
    pub nshots: u32,
}

impl Default for AvoidedCrossingParams {
    fn default() -> Self {
        AvoidedCrossingParams {
            freq_width_hz: 240.0e6,
            freq_step_hz: 1.0e6,
            bias_min_v: 0.05,
            bias_max_v: 0.11,
            bias_step_v: 0.004,
            nshots: 1024,
        }
    }
}

/// Positions of the two branch peaks in one bias column, or `None` when
/// only one branch is visible inside the frequency window.
fn two_peaks(freqs: &[f64], mags: &[f64]) -> Option<(f64, f64)> {
    let baseline = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let first = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let refined_first = refine_extremum(freqs, mags, first);
    // Mask a window around the first peak before searching for the second.
    let window = 10usize;
    let mut second = None;
    let mut best = f64::NEG_INFINITY;
    for (i, &m) in mags.iter().enumerate() {
        if i.abs_diff(first) <= window {
            continue;
        }
        if m > best {
            best = m;
            second = Some(i);
        }
    }
    let second = second?;
    // A real branch has height comparable to the first; a Lorentzian tail
    // does not.
    if mags[second] - baseline < 0.3 * (mags[first] - baseline) {
        return None;
    }
    let refined_first = lorentzian_refine(freqs, mags, first).unwrap_or(refined_first);
    let refined_second =
        lorentzian_refine(freqs, mags, second).unwrap_or(refine_extremum(freqs, mags, second));
    if refined_first <= refined_second {
        Some((refined_first, refined_second))
    } else {
        Some((refined_second, refined_first))
    }
}

/// Sub-grid peak position from a windowed Lorentzian fit around `idx`.
fn lorentzian_refine(freqs: &[f64], mags: &[f64], idx: usize) -> Option<f64> {
    let lo = idx.saturating_sub(6);
    let hi = (idx + 7).min(freqs.len());
    if hi - lo < 5 {
        return None;
    }
    let window_f = &freqs[lo..hi];
    let window_m = &mags[lo..hi];
    let floor = window_m.iter().copied().fold(f64::INFINITY, f64::min);
    let step = freqs[1] - freqs[0];
    let seed = [
        mags[idx] - floor,
        refine_extremum(freqs, mags, idx),
        2.0 * step,
        floor,
    ];
    let fit = levenberg_marquardt(&numerics::lorentzian(), &seed, window_f, window_m).ok()?;
    if !fit.converged {
        return None;
    }
    let f0 = fit.params[1];
    (f0 >= window_f[0] && f0 <= window_f[window_f.len() - 1]).then_some(f0)
}

pub struct AvoidedCrossing;

impl Routine for AvoidedCrossing {
    fn name(&self) -> &'static str {
        "avoided_crossing"
    }

    fn target_kind(&self) -> TargetKind {
        TargetKind::Pair
    }

    fn default_params(&self) -> Value {
        resolved_params(&AvoidedCrossingParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<AvoidedCrossingParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["coupling_hz"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: AvoidedCrossingParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let pair = pair_config(config, target)?;
            let cal_a = config
                .qubits
                .get(&pair.qubit_a)
                .ok_or_else(|| ProtocolError::UnknownTarget {
                    target: pair.qubit_a.to_string(),
                })?;
            let cal_b = config
                .qubits
                .get(&pair.qubit_b)
                .ok_or_else(|| ProtocolError::UnknownTarget {
                    target: pair.qubit_b.to_string(),
                })?;
            let biases: Vec<f64> = sweep_range(p.bias_min_v, p.bias_max_v, p.bias_step_v)?
                .into_iter()
                .map(|b| b + cal_a.sweetspot_v)
                .collect();
            let freqs = sweep_around(cal_b.drive_frequency_hz, p.freq_width_hz, p.freq_step_hz)?;
            let set = device.simulate(&ExperimentSpec::AvoidedCrossing {
                pair: target.clone(),
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
                let mut valid_biases = Vec::with_capacity(biases.len());
                let mut gaps_mhz_sq = Vec::with_capacity(biases.len());
                for row in 0..biases.len() {
                    let col = &mags[row * nf..(row + 1) * nf];
                    if let Some((lo, hi)) = two_peaks(&freqs, col) {
                        let gap_mhz = (hi - lo) / 1e6;
                        valid_biases.push(biases[row]);
                        gaps_mhz_sq.push(gap_mhz * gap_mhz);
                    }
                }
                if gaps_mhz_sq.len() < 5 {
                    return Ok(TargetResult {
                        values: Default::default(),
                        quality: FitQuality::Poor,
                        message: Some(
                            "bias range does not cross the resonance (both branches never visible)"
                                .into(),
                        ),
                        fit: None,
                    });
                }
                let biases = valid_biases;
                // gap^2(V) is a parabola with its minimum 4 g^2 at the
                // resonance bias; fit locally around the minimum where the
                // branch detuning is close to linear in bias.
                let min_idx = gaps_mhz_sq
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                let min_gap_hz = gaps_mhz_sq[min_idx].max(0.0).sqrt() * 1e6;
                if min_idx == 0 || min_idx + 1 == gaps_mhz_sq.len() {
                    let mut values = std::collections::BTreeMap::new();
                    values.insert("min_gap_hz".into(), min_gap_hz);
                    return Ok(TargetResult {
                        values,
                        quality: FitQuality::Poor,
                        message: Some("bias range does not cross the resonance".into()),
                        fit: None,
                    });
                }
                // Narrow window: the branch detuning is linear in bias only
                // close to the crossing.
                let lo = min_idx.saturating_sub(2);
                let hi = (min_idx + 3).min(gaps_mhz_sq.len());
                let window_b = &biases[lo..hi];
                let window_g = &gaps_mhz_sq[lo..hi];
                let span = window_b[window_b.len() - 1] - window_b[0];
                let edge = window_g[0].max(window_g[window_g.len() - 1]);
                let curvature_seed =
                    (edge - gaps_mhz_sq[min_idx]).max(1.0) / (span / 2.0).powi(2);
                let seed = [curvature_seed, biases[min_idx], gaps_mhz_sq[min_idx]];
                let fit =
                    levenberg_marquardt(&numerics::parabola(), &seed, window_b, window_g)
                        .map_err(|e| e.to_string())?;
                let resonance_bias = fit.params[1];
                let g_hz = (fit.params[2].max(0.0)).sqrt() / 2.0 * 1e6;
                let mut quality = FitQuality::Good;
                let mut message = None;
                if !fit.converged {
                    quality = FitQuality::Failed;
                    message = Some("branch-gap fit did not converge".into());
                } else if resonance_bias < biases[0] || resonance_bias > biases[biases.len() - 1]
                {
                    quality = FitQuality::Poor;
                    message = Some("bias range does not cross the resonance".into());
                }
                let mut values = std::collections::BTreeMap::new();
                values.insert("coupling_hz".into(), g_hz);
                values.insert("resonance_bias_v".into(), resonance_bias);
                values.insert("min_gap_hz".into(), min_gap_hz);
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
                tr.value("coupling_hz")
                    .map(|g| ConfigUpdate::new(format!("pairs.{target}.coupling_hz"), g))
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
                &format!("Avoided crossing - {target}"),
                "probe frequency (Hz)",
                "bias (V)",
                &freqs,
                &biases,
                &mags,
            ));
        }
        vec![SectionContent {
            title: "Avoided crossing".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChevronParams {
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub amplitude_step: f64,
    pub duration_min_ns: f64,
    pub duration_max_ns: f64,
    pub duration_step_ns: f64,
    pub nshots: u32,
}

impl Default for ChevronParams {
    fn default() -> Self {
        ChevronParams {
            amplitude_min: 0.23,
            amplitude_max: 0.47,
            amplitude_step: 0.01,
            duration_min_ns: 4.0,
            duration_max_ns: 150.0,
            duration_step_ns: 4.0,
            nshots: 1024,
        }
    }
}

pub struct Chevron;

impl Routine for Chevron {
    fn name(&self) -> &'static str {
        "chevron"
    }

    fn target_kind(&self) -> TargetKind {
        TargetKind::Pair
    }

    fn default_params(&self) -> Value {
        resolved_params(&ChevronParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<ChevronParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["cz_flux_amplitude", "cz_duration_ns"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: ChevronParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let pair = pair_config(config, target)?;
            let cal_a = config
                .qubits
                .get(&pair.qubit_a)
                .ok_or_else(|| ProtocolError::UnknownTarget {
                    target: pair.qubit_a.to_string(),
                })?;
            let amplitudes = sweep_range(p.amplitude_min, p.amplitude_max, p.amplitude_step)?;
            let durations = sweep_range(p.duration_min_ns, p.duration_max_ns, p.duration_step_ns)?;
            let mut set = device.simulate(&ExperimentSpec::Chevron {
                pair: target.clone(),
                amplitudes,
                durations_ns: durations,
                readout_frequency_hz: cal_a.readout_frequency_hz,
                nshots: p.nshots,
            })?;
            stamp_classifier(&mut set, cal_a.classifier.as_ref());
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let amplitudes = extract_axis(set, "amplitude")?;
                let durations = extract_axis(set, "duration_ns")?;
                let probs = extract_probabilities(set)?.probs;
                let nd = durations.len();
                if probs.len() != amplitudes.len() * nd {
                    return Err("chevron grid shape mismatch".into());
                }
                // Column fits: oscillation frequency and contrast per
                // flux-pulse amplitude.
                let mut columns = Vec::with_capacity(amplitudes.len());
                for (row, &a) in amplitudes.iter().enumerate() {
                    let ys = &probs[row * nd..(row + 1) * nd];
                    if let Ok(fit) = fit_cosine_multistart(&durations, ys, &[]) {
                        if fit.converged {
                            columns.push((a, fit.params[1], fit.params[0]));
                        }
                    }
                }
                if columns.is_empty() {
                    return Err("no chevron column produced a convergent fit".into());
                }
                let max_contrast = columns
                    .iter()
                    .map(|c| c.2)
                    .fold(f64::NEG_INFINITY, f64::max);
                // The apex maximizes contrast and minimizes oscillation
                // frequency; restrict to high-contrast columns first.
                let apex = columns
                    .iter()
                    .filter(|c| c.2 >= 0.25 * max_contrast)
                    .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                    .copied()
                    .ok_or("no valid apex column")?;
                let (a_star, freq_per_ns, _) = apex;
                let full_swap_ns = 1.0 / (2.0 * freq_per_ns);
                let g_hz = freq_per_ns * 1e9 / 2.0;
                let mut values = std::collections::BTreeMap::new();
                values.insert("cz_flux_amplitude".into(), a_star);
                values.insert("cz_duration_ns".into(), full_swap_ns);
                values.insert("coupling_hz".into(), g_hz);
                values.insert("apex_frequency_hz".into(), freq_per_ns * 1e9);
                let span = durations[durations.len() - 1] - durations[0];
                let quality = if full_swap_ns > span {
                    FitQuality::Poor
                } else {
                    FitQuality::Good
                };
                let message = (quality == FitQuality::Poor)
                    .then(|| "full exchange slower than the swept window".to_string());
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
        let mut updates = Vec::new();
        for (target, tr) in &results.per_target {
            if tr.quality == FitQuality::Failed {
                continue;
            }
            if let Some(a) = tr.value("cz_flux_amplitude") {
                updates.push(ConfigUpdate::new(
                    format!("pairs.{target}.cz_flux_amplitude"),
                    a,
                ));
            }
            if let Some(t) = tr.value("cz_duration_ns") {
                updates.push(ConfigUpdate::new(
                    format!("pairs.{target}.cz_duration_ns"),
                    t,
                ));
            }
        }
        updates
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(amps), Ok(durs), Ok(extraction)) = (
                extract_axis(set, "amplitude"),
                extract_axis(set, "duration_ns"),
                extract_probabilities(set),
            ) else {
                continue;
            };
            figures.push(svg::heatmap_figure(
                &format!("Chevron - {target}"),
                "flux pulse duration (ns)",
                "flux pulse amplitude",
                &durs,
                &amps,
                &extraction.probs,
            ));
        }
        vec![SectionContent {
            title: "Chevron".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CzVirtualPhaseParams {
    pub phase_points: u32,
    pub nshots: u32,
}

impl Default for CzVirtualPhaseParams {
    fn default() -> Self {
        CzVirtualPhaseParams {
            phase_points: 25,
            nshots: 1024,
        }
    }
}

/// Rebuild a standard shot-mode ArraySet from control-tagged array names so
/// the shared probability extraction applies.
fn control_subset(set: &ArraySet, control: u8) -> Result<ArraySet, String> {
    let mut sub = ArraySet::new();
    sub.metadata = set.metadata.clone();
    for (kind, target_name) in [("probability", "probability"), ("iq", "iq")] {
        let name = format!("{kind}_control{control}");
        if let Some(arr) = set.array(&name) {
            sub.insert(target_name, arr.clone());
        }
    }
    if sub.arrays.is_empty() {
        return Err(format!("no arrays for control state {control}"));
    }
    Ok(sub)
}

pub struct CzVirtualPhase;

impl Routine for CzVirtualPhase {
    fn name(&self) -> &'static str {
        "cz_virtual_phase"
    }

    fn target_kind(&self) -> TargetKind {
        TargetKind::Pair
    }

    fn default_params(&self) -> Value {
        resolved_params(&CzVirtualPhaseParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<CzVirtualPhaseParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["conditional_phase_rad", "virtual_phase_rad"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: CzVirtualPhaseParams = parse_params(self.name(), params)?;
        if p.phase_points < 9 {
            return Err(ProtocolError::Precondition(
                "phase sweep needs at least 9 points".into(),
            ));
        }
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let pair = pair_config(config, target)?;
            let cal_a = config
                .qubits
                .get(&pair.qubit_a)
                .ok_or_else(|| ProtocolError::UnknownTarget {
                    target: pair.qubit_a.to_string(),
                })?;
            let n = p.phase_points as usize;
            let phases: Vec<f64> = (0..n)
                .map(|i| -std::f64::consts::PI + std::f64::consts::TAU * i as f64 / n as f64)
                .collect();
            let mut merged = ArraySet::new();
            for control in [0u8, 1u8] {
                let set = device.simulate(&ExperimentSpec::CzPhase {
                    pair: target.clone(),
                    phases_rad: phases.clone(),
                    control_state: control,
                    readout_frequency_hz: cal_a.readout_frequency_hz,
                    nshots: p.nshots,
                })?;
                for (name, arr) in set.arrays {
                    if name == "phase_rad" {
                        merged.arrays.entry(name).or_insert(arr);
                    } else {
                        merged.insert(format!("{name}_control{control}"), arr);
                    }
                }
            }
            merged.set_meta("pair", target.as_str());
            merged.set_meta("target_qubit", pair.qubit_a.as_str());
            stamp_classifier(&mut merged, cal_a.classifier.as_ref());
            data.per_target.insert(target.clone(), merged);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let phases = extract_axis(set, "phase_rad")?;
                let mut fitted = [0.0f64; 2];
                let mut worst_quality = FitQuality::Good;
                for control in [0u8, 1u8] {
                    let sub = control_subset(set, control)?;
                    let probs = extract_probabilities(&sub)?.probs;
                    let fit = fit_cosine_multistart(
                        &phases,
                        &probs,
                        &[1.0 / std::f64::consts::TAU],
                    )?;
                    if !fit.converged {
                        return Err(format!("phase fit for control {control} did not converge"));
                    }
                    // The model is P = B + A cos(2 pi f theta + phi) with the
                    // physical form cos(theta + phi_s): accept only fits
                    // locking to one cycle per 2 pi.
                    let cycles = fit.params[1] * std::f64::consts::TAU;
                    if (cycles - 1.0).abs() > 0.1 {
                        worst_quality = FitQuality::Poor;
                    }
                    fitted[control as usize] = wrap_phase(fit.params[2]);
                }
                let conditional = wrap_phase(fitted[1] - fitted[0]);
                let mut values = std::collections::BTreeMap::new();
                values.insert("phi_control0_rad".into(), fitted[0]);
                values.insert("phi_control1_rad".into(), fitted[1]);
                values.insert("conditional_phase_rad".into(), conditional);
                values.insert("virtual_phase_rad".into(), wrap_phase(-fitted[0]));
                Ok(TargetResult {
                    values,
                    quality: worst_quality,
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

    fn update(&self, results: &Results, config: &PlatformConfig) -> Vec<ConfigUpdate> {
        let mut updates = Vec::new();
        for (target, tr) in &results.per_target {
            if tr.quality == FitQuality::Failed {
                continue;
            }
            let Some(pair) = config.pairs.get(target) else {
                continue;
            };
            if let Some(cond) = tr.value("conditional_phase_rad") {
                updates.push(ConfigUpdate::new(
                    format!("pairs.{target}.conditional_phase_rad"),
                    cond,
                ));
            }
            if let Some(virt) = tr.value("virtual_phase_rad") {
                updates.push(ConfigUpdate::new(
                    format!("pairs.{target}.virtual_phase_rad.{}", pair.qubit_a),
                    virt,
                ));
            }
        }
        updates
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let Ok(phases) = extract_axis(set, "phase_rad") else {
                continue;
            };
            let mut series = Vec::new();
            for control in [0u8, 1u8] {
                let Ok(sub) = control_subset(set, control) else {
                    continue;
                };
                let Ok(extraction) = extract_probabilities(&sub) else {
                    continue;
                };
                series.push(
                    Series::new(
                        format!("control |{control}>"),
                        control as usize,
                        SeriesStyle::LineWithMarkers,
                    )
                    .with_points(
                        phases
                            .iter()
                            .copied()
                            .zip(extraction.probs.iter().copied())
                            .collect(),
                    ),
                );
            }
            figures.push(svg::xy_figure(
                &format!("CZ phase sweep - {target}"),
                "virtual phase (rad)",
                "P(1)",
                &series,
            ));
        }
        vec![SectionContent {
            title: "CZ virtual phase".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}
