//! Run configuration: JSON file keys mirror the command-line flags one-to-one,
//! and flags given on the command line override the file.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use spinmarket_core::{Beta, ModelParams, Params, Perturbation, TieRule};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    #[default]
    KPlus,
    FixedTotal,
}

/// Every option, each possibly unset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PartialConfig {
    pub n: Option<usize>,
    pub dim: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub frozen: Option<bool>,
    pub lambda: Option<f64>,
    pub p_star: Option<f64>,
    pub k_plus: Option<usize>,
    pub k_minus: Option<usize>,
    pub tie_rule: Option<TieRule>,
    pub seed: Option<u64>,
    pub epochs: Option<u64>,
    pub burn_in: Option<u64>,
    pub replicas: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
    pub mode: Option<SweepMode>,
    pub total: Option<usize>,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        PartialConfig { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl PartialConfig {
    /// `self` wins wherever it is set.
    pub fn over(self, lower: PartialConfig) -> PartialConfig {
        let mut merged = overlay!(
            self, lower, n, dim, alpha, beta, frozen, lambda, p_star, k_plus, k_minus, tie_rule, seed, epochs, burn_in,
            replicas, out, format, threads, mode, total, from, to
        );
        // A temperature choice on the command line replaces the file's as a whole.
        if self.frozen == Some(true) {
            merged.beta = None;
        } else if self.beta.is_some() {
            merged.frozen = None;
        }
        merged
    }

    /// Reads a config file. A run manifest is also accepted; its `config` block is used.
    pub fn load(path: &Path) -> CliResult<PartialConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {} is not valid JSON: {e}", path.display())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("command").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn resolve(self) -> CliResult<RunConfig> {
        if self.frozen == Some(true) && self.beta.is_some() {
            return Err(CliError::Validation("`beta` and `frozen` are mutually exclusive".into()));
        }
        let d = RunConfig::default();
        Ok(RunConfig {
            n: self.n.unwrap_or(d.n),
            dim: self.dim.unwrap_or(d.dim),
            alpha: self.alpha.unwrap_or(d.alpha),
            beta: self.beta,
            frozen: self.beta.is_none(),
            lambda: self.lambda.unwrap_or(d.lambda),
            p_star: self.p_star.unwrap_or(d.p_star),
            k_plus: self.k_plus.unwrap_or(d.k_plus),
            k_minus: self.k_minus.unwrap_or(d.k_minus),
            tie_rule: self.tie_rule.unwrap_or(d.tie_rule),
            seed: self.seed.unwrap_or(d.seed),
            epochs: self.epochs.unwrap_or(d.epochs),
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            replicas: self.replicas.unwrap_or(d.replicas),
            out: self.out.unwrap_or(d.out),
            format: self.format.unwrap_or(d.format),
            threads: self.threads.or(d.threads),
            mode: self.mode.unwrap_or(d.mode),
            total: self.total,
            from: self.from,
            to: self.to,
        })
    }
}

/// Fully resolved options. Serializes to the config-file shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub n: usize,
    pub dim: usize,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub frozen: bool,
    pub lambda: f64,
    pub p_star: f64,
    pub k_plus: usize,
    pub k_minus: usize,
    pub tie_rule: TieRule,
    pub seed: u64,
    pub epochs: u64,
    pub burn_in: u64,
    pub replicas: u64,
    pub out: PathBuf,
    pub format: Format,
    pub threads: Option<usize>,
    pub mode: SweepMode,
    pub total: Option<usize>,
    pub from: Option<usize>,
    pub to: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 128,
            dim: 2,
            alpha: 5.0,
            beta: None,
            frozen: true,
            lambda: 1.0,
            p_star: 1.0,
            k_plus: 0,
            k_minus: 0,
            tie_rule: TieRule::Paper,
            seed: 42,
            epochs: 1_000_000,
            burn_in: 100_000,
            replicas: 1,
            out: PathBuf::from("."),
            format: Format::Csv,
            threads: None,
            mode: SweepMode::KPlus,
            total: None,
            from: None,
            to: None,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> CliResult<Params> {
        let beta = match self.beta {
            Some(b) => Beta::Finite(b),
            None => Beta::Frozen,
        };
        Ok(ModelParams::new(self.n, self.dim, self.alpha, beta, self.lambda, self.p_star)?)
    }

    pub fn perturbation(&self) -> CliResult<Perturbation> {
        let pert = Perturbation::new(self.k_plus, self.k_minus);
        pert.validate(self.n)?;
        Ok(pert)
    }

    /// Runs `f` on a pool with the configured thread count, or the global pool.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> CliResult<T> {
        match self.threads {
            None => Ok(f()),
            Some(0) => Err(CliError::Validation("threads must be positive".into())),
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map(|pool| pool.install(f))
                .map_err(|e| CliError::Validation(format!("thread pool: {e}"))),
        }
    }
}
