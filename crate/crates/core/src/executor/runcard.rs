//! Experiment runcards: the serialized description an [`run`](super::run)
//! consumes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExecutorError;
use crate::protocols;

fn default_update() -> bool {
    true
}

/// One protocol invocation inside a runcard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Action {
    /// Unique id within the runcard; also the output sub-directory name.
    pub id: String,
    /// Registered protocol name.
    pub operation: String,
    /// Overrides the runcard-level target list when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<String>>,
    /// Apply this action's config updates before the next action.
    #[serde(default = "default_update")]
    pub update: bool,
    /// Protocol parameters; omitted fields take registry defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Runcard {
    /// Platform name, resolved under `QCAL_PLATFORMS`.
    pub platform: String,
    /// Default targets for actions that do not name their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<String>>,
    pub actions: Vec<Action>,
}

impl Runcard {
    pub fn validate(&self) -> Result<(), ExecutorError> {
        if self.actions.is_empty() {
            return Err(ExecutorError::EmptyRuncard);
        }
        let mut seen = std::collections::BTreeSet::new();
        for action in &self.actions {
            if !seen.insert(&action.id) {
                return Err(ExecutorError::DuplicateActionId(action.id.clone()));
            }
            if action.id.is_empty()
                || !action
                    .id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(ExecutorError::RuncardParse {
                    path: Default::default(),
                    message: format!(
                        "action id {:?} must be non-empty ASCII alphanumerics, '-' or '_'",
                        action.id
                    ),
                });
            }
            let routine = protocols::lookup(&action.operation).map_err(|_| {
                ExecutorError::UnknownOperation {
                    name: action.operation.clone(),
                    suggestions: nearest_names(&action.operation),
                }
            })?;
            if let Some(params) = &action.parameters {
                if let Err(e) = routine.validate_params(params) {
                    return Err(ExecutorError::InvalidActionParameters {
                        action: action.id.clone(),
                        message: e.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Registered names ranked by edit distance to the unknown operation.
fn nearest_names(unknown: &str) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> = protocols::protocol_names()
        .into_iter()
        .map(|name| (edit_distance(unknown, name), name))
        .collect();
    scored.sort();
    scored
        .into_iter()
        .take(3)
        .map(|(_, name)| name.to_string())
        .collect()
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            current[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(current[j] + 1);
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Parse a runcard from YAML text.
pub fn parse_runcard(text: &str, origin: &Path) -> Result<Runcard, ExecutorError> {
    let runcard: Runcard =
        serde_yaml::from_str(text).map_err(|e| ExecutorError::RuncardParse {
            path: origin.to_path_buf(),
            // serde_yaml errors carry line and column information.
            message: e.to_string(),
        })?;
    runcard.validate()?;
    Ok(runcard)
}

/// Load and validate a runcard file.
pub fn load_runcard(path: &Path) -> Result<Runcard, ExecutorError> {
    let text = std::fs::read_to_string(path).map_err(|e| super::io_err(path, e))?;
    parse_runcard(&text, path)
}
