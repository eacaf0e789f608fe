use std::path::Path;

use pdd_gsa::fit::{FitDiagnostics, Method};
use pdd_gsa::{DmorphConfig, Distribution, Error, PddModel, Result, SamplingMethod};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Problem description shared by `sample` and `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub distributions: Vec<Distribution>,
    /// Interaction order `S`.
    pub variate: usize,
    /// Polynomial order `m`.
    pub order: usize,
    /// Forces a regression method; chosen from the sample budget otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default)]
    pub sampling: SamplingMethod,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub regression: DmorphConfig,
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distributions.is_empty() {
            return Err(Error::Config("at least one input distribution is required".into()));
        }
        self.regression.validate()
    }
}

/// On-disk surrogate: the model itself plus how it was fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub model: PddModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
