use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use spinmarket_core::TieRule;

use crate::config::{Format, PartialConfig, SweepMode};

#[derive(Debug, Parser)]
#[command(
    name = "spinmarket",
    version,
    about = "Spin-model market microstructure: simulation, invariant measures, sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo run: N+ histogram, summary statistics, manifest.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Independent replicas, run in parallel and merged in replica order.
        #[arg(long)]
        replicas: Option<u64>,
    },
    /// Stationary distribution of the free +1 count.
    Invariant {
        #[command(flatten)]
        common: CommonArgs,
        /// Cross-check the distribution against the chain oracle.
        #[arg(long)]
        verify: bool,
    },
    /// Stationary moments and residual uncertainty.
    Moments {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Residual uncertainty over pinned-spin counts.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        mode: Option<SweepMode>,
        /// k+ + k- for `--mode fixed-total`.
        #[arg(long)]
        total: Option<usize>,
        /// First k+ of the sweep.
        #[arg(long)]
        from: Option<usize>,
        /// Last k+ of the sweep.
        #[arg(long)]
        to: Option<usize>,
    },
    /// Cross-validation battery; exits 3 if any check fails.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Closed-form checks only.
        #[arg(long)]
        quick: bool,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Number of sites N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension d; neighborhoods have 2d sites.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Coupling constant.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Finite inverse temperature.
    #[arg(long, conflicts_with = "frozen")]
    pub beta: Option<f64>,
    /// Zero-temperature limit (default).
    #[arg(long)]
    pub frozen: bool,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p_star: Option<f64>,
    /// Sites pinned to +1.
    #[arg(long)]
    pub k_plus: Option<usize>,
    /// Sites pinned to -1.
    #[arg(long)]
    pub k_minus: Option<usize>,
    /// Resolution of a zero field in the frozen phase: paper|limit.
    #[arg(long)]
    pub tie_rule: Option<TieRule>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub burn_in: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON config file (or a previous run manifest); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel cells and replicas.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl CommonArgs {
    pub fn partial(&self) -> PartialConfig {
        PartialConfig {
            n: self.n,
            dim: self.dim,
            alpha: self.alpha,
            beta: self.beta,
            frozen: self.frozen.then_some(true),
            lambda: self.lambda,
            p_star: self.p_star,
            k_plus: self.k_plus,
            k_minus: self.k_minus,
            tie_rule: self.tie_rule,
            seed: self.seed,
            epochs: self.epochs,
            burn_in: self.burn_in,
            out: self.out.clone(),
            format: self.format,
            threads: self.threads,
            ..Default::default()
        }
    }
}
