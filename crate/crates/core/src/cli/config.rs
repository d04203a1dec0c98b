//! TOML experiment files.
//!
//! ```toml
//! [run]
//! seed = 7
//! reps = 1000
//! out = "results"
//! format = "csv"      # or "json"
//! threads = 4
//!
//! [oneway]
//! n = 10
//! k = 50              # oneway-bf
//! k_min = 1           # median-curve
//! k_max = 200
//! tau = 1.0
//! epsilon = 0.3       # or: mu = [0.1, -0.2, ...]
//! pi2 = 0.5
//! freeze_mu = false
//!
//! [survey]
//! population = 1000
//! sample_size = 10
//! psi = 0.3
//! eta = 0.01
//! alpha0 = 1.0
//! beta0 = 1.0
//! improper = false
//! theta = [0.1, 0.2]  # optional fixed θ instead of hierarchical draws
//! ```
//!
//! Every key is optional; command-line flags take precedence. Unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CliError, Format};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub oneway: OnewaySection,
    #[serde(default)]
    pub survey: SurveySection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnewaySection {
    pub n: Option<u32>,
    pub k: Option<u32>,
    pub k_min: Option<u32>,
    pub k_max: Option<u32>,
    pub tau: Option<f64>,
    pub epsilon: Option<f64>,
    pub mu: Option<Vec<f64>>,
    pub pi2: Option<f64>,
    pub freeze_mu: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySection {
    pub population: Option<usize>,
    pub sample_size: Option<usize>,
    pub psi: Option<f64>,
    pub eta: Option<f64>,
    pub alpha0: Option<f64>,
    pub beta0: Option<f64>,
    pub improper: Option<bool>,
    pub theta: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
