use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use spinmarket_core::{Params, Perturbation, TieRule};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to reproduce a run. Feeding the manifest back through
/// `--config` repeats it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub params: Params,
    pub perturbation: Perturbation,
    pub seed: u64,
    pub tie_rule: TieRule,
    pub epochs: u64,
    pub burn_in: u64,
    /// How the stationary law was obtained, for commands that compute one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, params: Params, started_at: DateTime<Utc>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            config: config.clone(),
            params,
            perturbation: Perturbation::new(config.k_plus, config.k_minus),
            seed: config.seed,
            tie_rule: config.tie_rule,
            epochs: config.epochs,
            burn_in: config.burn_in,
            method: None,
            started_at,
            finished_at: started_at,
            outputs: Vec::new(),
        }
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}_manifest.json")
    }
}
