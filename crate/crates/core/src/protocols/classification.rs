//! Single-shot readout classification.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::*;
use crate::device::ExperimentSpec;
use crate::numerics::train_linear_discriminant;
use crate::report::svg;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingleShotClassificationParams {
    pub nshots: u32,
}

impl Default for SingleShotClassificationParams {
    fn default() -> Self {
        SingleShotClassificationParams { nshots: 10_000 }
    }
}

fn cloud(set: &ArraySet, name: &str) -> Result<Vec<(f64, f64)>, String> {
    let arr = set.array(name).ok_or_else(|| format!("no {name} array"))?;
    let shape = arr.shape();
    if shape.len() != 2 || shape[1] != 2 {
        return Err(format!("unexpected {name} shape {shape:?}"));
    }
    let data = arr.as_f64().ok_or("shots must be f64")?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err("non-finite shot".into());
    }
    Ok(data.chunks(2).map(|c| (c[0], c[1])).collect())
}

pub struct SingleShotClassification;

impl Routine for SingleShotClassification {
    fn name(&self) -> &'static str {
        "single_shot_classification"
    }

    fn default_params(&self) -> Value {
        resolved_params(&SingleShotClassificationParams::default())
    }

    fn validate_params(&self, params: &Value) -> Result<(), ProtocolError> {
        parse_params::<SingleShotClassificationParams>(self.name(), params).map(|_| ())
    }

    fn owned_fields(&self) -> &'static [&'static str] {
        &["classifier", "readout_fidelity"]
    }

    fn acquire(
        &self,
        config: &PlatformConfig,
        targets: &[String],
        params: &Value,
        device: &mut Device,
    ) -> Result<Data, ProtocolError> {
        let p: SingleShotClassificationParams = parse_params(self.name(), params)?;
        let mut data = Data::new(self.name(), resolved_params(&p));
        for target in targets {
            let (cal, qubit) = qubit_config(config, target)?;
            let mut merged = ArraySet::new();
            for state in [0u8, 1u8] {
                let set = device.simulate(&ExperimentSpec::Shots {
                    qubit: qubit.clone(),
                    prepared_state: state,
                    readout_frequency_hz: cal.readout_frequency_hz,
                    nshots: p.nshots,
                })?;
                let iq = set
                    .array("iq")
                    .ok_or(DeviceError::InvalidSpec("missing iq".into()))?
                    .clone();
                merged.insert(format!("iq_state{state}"), iq);
            }
            merged.set_meta("qubit", target.as_str());
            merged.set_meta("readout_frequency_hz", cal.readout_frequency_hz);
            data.per_target.insert(target.clone(), merged);
        }
        Ok(data)
    }

    fn fit(&self, data: &Data) -> Results {
        let mut results = Results::new(&data.protocol);
        for (target, set) in &data.per_target {
            let outcome = (|| -> Result<TargetResult, String> {
                let shots0 = cloud(set, "iq_state0")?;
                let shots1 = cloud(set, "iq_state1")?;
                let trained = train_linear_discriminant(&shots0, &shots1);
                let mut values = std::collections::BTreeMap::new();
                values.insert("angle_rad".into(), trained.params.angle_rad);
                values.insert("threshold".into(), trained.params.threshold);
                values.insert(
                    "assignment_fidelity".into(),
                    trained.params.assignment_fidelity,
                );
                let (quality, message) = if trained.degenerate {
                    (
                        FitQuality::Poor,
                        Some("degenerate clouds: class means coincide".to_string()),
                    )
                } else {
                    (FitQuality::Good, None)
                };
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
            let (Some(angle), Some(threshold), Some(fidelity)) = (
                tr.value("angle_rad"),
                tr.value("threshold"),
                tr.value("assignment_fidelity"),
            ) else {
                continue;
            };
            updates.push(ConfigUpdate::new(
                format!("qubits.{target}.classifier"),
                serde_json::json!({
                    "angle_rad": angle,
                    "threshold": threshold,
                    "assignment_fidelity": fidelity,
                }),
            ));
            updates.push(ConfigUpdate::new(
                format!("qubits.{target}.readout_fidelity"),
                fidelity,
            ));
        }
        updates
    }

    fn report(&self, data: &Data, results: &Results) -> Vec<SectionContent> {
        let mut figures = Vec::new();
        for (target, set) in &data.per_target {
            let (Ok(shots0), Ok(shots1)) = (cloud(set, "iq_state0"), cloud(set, "iq_state1"))
            else {
                continue;
            };
            // Cap the rendered point count to keep reports light.
            let cap = 600usize;
            let take0: Vec<_> = shots0.iter().copied().take(cap).collect();
            let take1: Vec<_> = shots1.iter().copied().take(cap).collect();
            figures.push(svg::iq_figure(
                &format!("Single-shot clouds - {target}"),
                &take0,
                &take1,
            ));
        }
        vec![SectionContent {
            title: "Single-shot classification".into(),
            figures,
            tables: vec![results_table(results)],
            raw_html: None,
        }]
    }
}
