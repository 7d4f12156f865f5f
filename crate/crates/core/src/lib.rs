//! Spin model of market microstructure.
//!
//! A lattice of ±1 spins evolves by single-site updates driven by a field that
//! mixes a randomly resampled local neighborhood with a global imbalance
//! penalty. The crate provides:
//!
//! - [`lattice`] and [`simulate`]: the Monte Carlo process and its observables
//!   ([`observables`]: price, volume, conditional volatility);
//! - [`frozen`]: zero-temperature stay probabilities, the closed-form invariant
//!   measure of the plus-spin count and its moments;
//! - [`oracle`]: the same chain built by exact enumeration and solved by two
//!   independent stationary solvers;
//! - [`sweep`]: the residual-uncertainty surface over pinned-spin counts.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod error;
pub mod frozen;
pub mod lattice;
pub mod moments;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod scalar;
pub mod simulate;
pub mod sweep;

pub use error::{Error, Result};
pub use frozen::{
    band, f_minus, f_plus, invariant_measure, moments_general, moments_prop2, p_leave, p_stay, p_stay_beta,
    p_stay_limit, residual_uncertainty, threshold, threshold_c, tie_gap, FrozenMeasure, Threshold,
};
pub use lattice::{flip_probability, local_field, sample_neighborhood, step, LatticeState, Pin, StepEvent};
pub use moments::MomentSummary;
pub use observables::{conditional_volatility, imbalance, price, volume};
pub use oracle::{build_chain, stationary_moments, stationary_solve, total_variation, BirthDeathChain};
pub use params::{Beta, ModelParams, Perturbation, Regime, Spin, TieRule};
pub use scalar::Scalar;
pub use simulate::{replica_rng, simulate, SimulationConfig, Simulator, TrajectoryStats};
pub use sweep::{find_minima, sweep_fixed_total, sweep_k_plus, SweepRecord, SweepResult};

pub type Params = ModelParams<f64>;
pub type Measure = FrozenMeasure<f64>;
pub type Moments = MomentSummary<f64>;
pub type Chain = BirthDeathChain<f64>;
pub type Record = SweepRecord<f64>;
pub type Sweep = SweepResult<f64>;
