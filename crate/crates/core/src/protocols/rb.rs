//! Clifford randomized benchmarking.
//!
//! Sequences are sampled from a protocol-owned RNG (independent of the
//! device noise stream), the composed recovery Clifford is appended, and
//! survival decays are fit to `A p^m + B`. RB is benchmark-only: it never
//! updates the config.

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::*;
use crate::device::clifford::clifford_table;
use crate::device::{ExperimentSpec, NamedArray, PulseConfig};
use crate::numerics::{levenberg_marquardt, ModelSpec};
use crate::report::svg::{self, Series, SeriesStyle};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StandardRbParams {
    pub depths: Vec<u32>,
    pub sequences_per_depth: u32,
    pub nshots: u32,
    pub rng_seed: u64,
}

impl Default for StandardRbParams {
    fn default() -> Self {
        StandardRbParams {
            depths: vec![1, 20, 60, 120, 240],
            sequences_per_depth: 8,
            nshots: 512,
            rng_seed: 0x5eed,
        }
    }
}

/// Sample uniform Clifford sequences and append each one's recovery
/// element. Returns `(sequences, depths)` with one entry per sequence.
pub fn sample_rb_sequences(
    depths: &[u32],
    sequences_per_depth: u32,
    rng_seed: u64,
) -> (Vec<Vec<u8>>, Vec<u32>) {
    let table = clifford_table();
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(rng_seed);
    let mut sequences = Vec::new();
    let mut seq_depths = Vec::new();
    for &depth in depths {
        for _ in 0..sequences_per_depth {
            let mut seq: Vec<u8> = (0..depth).map(|_| rng.gen_range(0..24u8)).collect();
            let net = table.net_of_sequence(&seq);
            seq.push(table.inverse(net) as u8);
            sequences.push(seq);
            seq_depths.push(depth);
        }
    }
    (sequences, seq_depths)
}

/// Mean survival per depth, from per-sequence excitation probabilities.
fn survival_by_depth(depths: &[f64], probs: &[f64]) -> Vec<(f64, f64)> {
    let mut grouped: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
    for (&d, &p) in depths.iter().zip(probs) {
        let entry = grouped.entry(d as u64).or_insert((0.0, 0));
        entry.0 += 1.0 - p;
        entry.1 += 1;
    }
    grouped
        .into_iter()
        .map(|(d, (sum, n))| (d as f64, sum / n as f64))
        .collect()
}

/// Fit `A p^m + B`; flat-at-one data short-circuits to the degenerate
/// p = 1 solution with A + B equal to the observed survival.
pub(crate) fn fit_rb_decay(
    points: &[(f64, f64)],
) -> Result<(f64, f64, f64, Option<FitDiag>), String> {
    let survivals: Vec<f64> = points.iter().map(|p| p.1).collect();
    let spread = survivals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - survivals.iter().copied().fold(f64::INFINITY, f64::min);
    if spread < 1e-9 {
        let s = survivals[0];
        return Ok((1.0, s - 0.5, 0.5, None));
    }
    let depths: Vec<f64> = points.iter().map(|p| p.0).collect();
    let first = points[0];
    let last = points[points.len() - 1];
    let b_seed = 0.5;
    let a_seed = (first.1 - b_seed).max(0.05);
    let p_seed = if (first.1 - b_seed).abs() > 1e-6 && (last.1 - b_seed) / (first.1 - b_seed) > 0.0
    {
        ((last.1 - b_seed) / (first.1 - b_seed))
            .powf(1.0 / (last.0 - first.0).max(1.0))
            .clamp(0.5, 0.999_999)
    } else {
        0.99
    };
    let model = ModelSpec::new(3, |p: &[f64], m: f64| p[0] * p[1].powf(m) + p[2]).with_bounds(
        vec![(-2.0, 2.0), (1e-6, 1.0), (-1.0, 2.0)],
    );
    let fit = levenberg_marquardt(&model, &[a_seed, p_seed, b_seed], &depths, &survivals)
        .map_err(|e| e.to_string())?;
    if !fit.converged {
        return Err("RB decay fit did not converge".into());
    }
    let diag = FitDiag::from(&fit);
    Ok((fit.params[1], fit.params[0], fit.params[2], Some(diag)))
}

pub struct StandardRb;

impl Routine for StandardRb {
    fn name(&self) -> &'static str {
        "standard_rb"
    }

    fn default_params(&self) -> Value {
        resolved_params(&StandardRbParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<StandardRbParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &[]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: StandardRbParams = parse_params(self.name(), params)?;
        if p.depths.is_empty() || p.sequences_per_depth == 0 {
            return Err(ProtocolError::Precondition(
                "depths and sequences_per_depth must be non-empty".into(),
            ));
        }
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let (sequences, seq_depths) =
                sample_rb_sequences(&p.depths, p.sequences_per_depth, p.rng_seed);
            let pulse = PulseConfig {
                amplitude: cal.pi_pulse_amplitude,
                duration_ns: cal.pi_pulse_duration_ns,
                frequency_hz: cal.drive_frequency_hz,
                drag_beta: cal.drag_beta,
            };
            let mut set = device.simulate(&ExperimentSpec::CliffordSequences {
                qubit,
                sequences,
                pulse,
                readout_frequency_hz: cal.readout_frequency_hz,
                nshots: p.nshots,
            })?;
            let depth_axis: Vec<f64> = seq_depths.iter().map(|&d| d as f64).collect();
            set.insert("depth", NamedArray::f64(vec![depth_axis.len()], depth_axis));
            stamp_classifier(&mut set, cal.classifier.as_ref());
            data.per_target.insert(target.clone(), set);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let depths = extract_axis(set, "depth")?;
                let probs = extract_probabilities(set)?.probs;
                if depths.len() != probs.len() {
                    return Err("depth and probability lengths differ".into());
                }
                let by_depth = survival_by_depth(&depths, &probs);
                let (p_decay, amp, base, diag) = fit_rb_decay(&by_depth)?;
                let error = (1.0 - p_decay) / 2.0;
                let mut values = std::collections::BTreeMap::new();
                values.insert("decay_p".into(), p_decay);
                values.insert("error_per_clifford".into(), error);
                values.insert("fidelity".into(), 1.0 - error);
                values.insert("amplitude".into(), amp);
                values.insert("baseline".into(), base);
                Ok(TargetResult {
                    values,
                    quality: FitQuality::Good,
                    message: None,
                    fit: diag,
                })
            })();
            results
                .per_target
                .insert(target.clone(), outcome.unwrap_or_else(TargetResult::failed));
        }
        results
    }

    fn update(&self, _results: &Results, _config: &PlatformConfig) -> Vec<ConfigUpdate> {
        Vec::new()
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(depths), Ok(extraction)) =
                (extract_axis(set, "depth"), extract_probabilities(set))
            else {
                continue;
            };
            let by_depth = survival_by_depth(&depths, &extraction.probs);
            let mut series = vec![Series::new(
                format!("{target} survival"),
                0,
                SeriesStyle::Scatter,
            )
            .with_points(by_depth.clone())];
            if let Some(tr) = results.per_target.get(target) {
                if let (Some(p), Some(a), Some(b)) = (
                    tr.value("decay_p"),
                    tr.value("amplitude"),
                    tr.value("baseline"),
                ) {
                    let pts: Vec<(f64, f64)> = by_depth
                        .iter()
                        .map(|&(m, _)| (m, a * p.powf(m) + b))
                        .collect();
                    series.push(
                        Series::new(format!("{target} fit"), 1, SeriesStyle::Line)
                            .with_points(pts),
                    );
                }
            }
            figures.push(svg::xy_figure(
                &format!("Randomized benchmarking - {target}"),
                "sequence depth",
                "survival",
                &series,
            ));
        }
        vec![SectionContent {
            title: "Standard randomized benchmarking".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}
