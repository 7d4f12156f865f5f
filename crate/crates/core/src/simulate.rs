//! Monte Carlo driver and trajectory statistics.
//!
//! Every run owns a `ChaCha8Rng`. A run seeded with root seed `s` and replica
//! index `r` uses `ChaCha8Rng::seed_from_u64(s)` switched to stream `r`, so
//! replicas are independent and reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{is_absorbing_consensus, step, LatticeState};
use crate::moments::MomentSummary;
use crate::observables::{imbalance, price, volume};
use crate::params::{ModelParams, Perturbation, TieRule};
use crate::scalar::Scalar;

/// Random stream for replica `replica` of a run with root seed `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub epochs: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub tie_rule: TieRule,
    /// Start from exactly this many +1 sites instead of iid uniform free spins.
    pub initial_n_plus: Option<usize>,
}

impl SimulationConfig {
    pub fn new(epochs: u64, burn_in: u64, seed: u64) -> Self {
        SimulationConfig { epochs, burn_in, seed, tie_rule: TieRule::Paper, initial_n_plus: None }
    }

    pub fn with_tie_rule(mut self, tie_rule: TieRule) -> Self {
        self.tie_rule = tie_rule;
        self
    }

    pub fn with_initial_n_plus(mut self, n_plus: usize) -> Self {
        self.initial_n_plus = Some(n_plus);
        self
    }
}

/// Counts accumulated over recorded epochs. `N⁺` and `Y` are read after each step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub n_sites: usize,
    pub histogram: Vec<u64>,
    pub flips: u64,
    pub signed_sum: i64,
    pub epochs_recorded: u64,
    pub y_sum: u64,
    pub y2_sum: u64,
    pub final_n_plus: usize,
}

impl TrajectoryStats {
    pub fn new(n_sites: usize) -> Self {
        TrajectoryStats {
            n_sites,
            histogram: vec![0; n_sites + 1],
            flips: 0,
            signed_sum: 0,
            epochs_recorded: 0,
            y_sum: 0,
            y2_sum: 0,
            final_n_plus: 0,
        }
    }

    fn record(&mut self, n_plus: usize, x_signed: i8) {
        let y = imbalance(n_plus, self.n_sites) as u64;
        self.histogram[n_plus] += 1;
        self.flips += x_signed.unsigned_abs() as u64;
        self.signed_sum += x_signed as i64;
        self.epochs_recorded += 1;
        self.y_sum += y;
        self.y2_sum += y * y;
        self.final_n_plus = n_plus;
    }

    /// Adds another block of the same run.
    pub fn merge(&mut self, other: &TrajectoryStats) {
        assert_eq!(self.n_sites, other.n_sites, "merging stats of different lattices");
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self.flips += other.flips;
        self.signed_sum += other.signed_sum;
        self.epochs_recorded += other.epochs_recorded;
        self.y_sum += other.y_sum;
        self.y2_sum += other.y2_sum;
        self.final_n_plus = other.final_n_plus;
    }

    /// Empirical distribution of `N⁺` over `0..=N`.
    pub fn distribution<S: Scalar>(&self) -> Vec<S> {
        let total = S::from_u64(self.epochs_recorded).unwrap();
        self.histogram.iter().map(|&c| S::from_u64(c).unwrap() / total).collect()
    }

    pub fn flip_rate<S: Scalar>(&self) -> S {
        S::from_u64(self.flips).unwrap() / S::from_u64(self.epochs_recorded).unwrap()
    }

    pub fn empirical_moments<S: Scalar>(&self) -> MomentSummary<S> {
        let total = S::from_u64(self.epochs_recorded).unwrap();
        MomentSummary::from_raw(
            S::from_i64(self.signed_sum).unwrap() / total,
            S::from_u64(self.flips).unwrap() / total,
            S::from_u64(self.y_sum).unwrap() / total,
            S::from_u64(self.y2_sum).unwrap() / total,
        )
    }

    /// Mean price and volume over recorded epochs.
    pub fn mean_price_volume<S: Scalar>(&self, params: &ModelParams<S>) -> (S, S) {
        let total = S::from_u64(self.epochs_recorded).unwrap();
        let mut p = S::zero();
        let mut v = S::zero();
        for (n_plus, &c) in self.histogram.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let w = S::from_u64(c).unwrap() / total;
            p = p + w * price(n_plus, params);
            v = v + w * S::of_usize(volume(n_plus, self.n_sites));
        }
        (p, v)
    }
}

/// A lattice with its own random stream.
#[derive(Debug, Clone)]
pub struct Simulator<S> {
    params: ModelParams<S>,
    tie_rule: TieRule,
    state: LatticeState,
    rng: ChaCha8Rng,
}

impl<S: Scalar> Simulator<S> {
    pub fn new(
        params: ModelParams<S>,
        pert: Perturbation,
        tie_rule: TieRule,
        initial_n_plus: Option<usize>,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        params.validate()?;
        let state = match initial_n_plus {
            Some(n_plus) => LatticeState::with_n_plus(params.n_sites, pert, n_plus, &mut rng)?,
            None => LatticeState::random(params.n_sites, pert, &mut rng)?,
        };
        Ok(Simulator { params, tie_rule, state, rng })
    }

    pub fn state(&self) -> &LatticeState {
        &self.state
    }

    pub fn advance(&mut self, epochs: u64) {
        for _ in 0..epochs {
            step(&mut self.state, &self.params, self.tie_rule, &mut self.rng);
        }
    }

    pub fn record(&mut self, epochs: u64) -> TrajectoryStats {
        let mut stats = TrajectoryStats::new(self.params.n_sites);
        for _ in 0..epochs {
            let ev = step(&mut self.state, &self.params, self.tie_rule, &mut self.rng);
            stats.record(self.state.n_plus(), ev.x_signed);
        }
        stats
    }

    /// Steps until an absorbing consensus is reached; returns the epoch count, or
    /// `None` if `max_epochs` pass first.
    pub fn run_until_absorbed(&mut self, max_epochs: u64) -> Option<u64> {
        for n in 0..=max_epochs {
            if is_absorbing_consensus(&self.state, &self.params, self.tie_rule) {
                return Some(n);
            }
            if n < max_epochs {
                step(&mut self.state, &self.params, self.tie_rule, &mut self.rng);
            }
        }
        None
    }
}

/// Runs `burn_in` unrecorded then `epochs` recorded epochs. Deterministic in its inputs.
pub fn simulate<S: Scalar>(
    params: &ModelParams<S>,
    pert: Perturbation,
    config: &SimulationConfig,
) -> Result<TrajectoryStats> {
    if config.epochs == 0 {
        return Err(Error::Config("epochs must be positive".into()));
    }
    pert.validate(params.n_sites)?;
    let mut sim = Simulator::new(*params, pert, config.tie_rule, config.initial_n_plus, replica_rng(config.seed, 0))?;
    sim.advance(config.burn_in);
    Ok(sim.record(config.epochs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epochs_rejected() {
        let p = ModelParams::frozen(16, 1, 4.0f64).unwrap();
        assert!(simulate(&p, Perturbation::NONE, &SimulationConfig::new(0, 0, 1)).is_err());
        let one = simulate(&p, Perturbation::NONE, &SimulationConfig::new(1, 0, 1)).unwrap();
        assert_eq!(one.histogram.iter().sum::<u64>(), 1);
    }

    #[test]
    fn invalid_perturbation_rejected() {
        let p = ModelParams::frozen(16, 1, 4.0f64).unwrap();
        let r = simulate(&p, Perturbation::new(10, 6), &SimulationConfig::new(10, 0, 1));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn same_seed_same_stats() {
        let p = ModelParams::frozen(32, 2, 5.0f64).unwrap();
        let cfg = SimulationConfig::new(20_000, 1_000, 99).with_tie_rule(TieRule::Limit);
        let a = simulate(&p, Perturbation::new(3, 1), &cfg).unwrap();
        let b = simulate(&p, Perturbation::new(3, 1), &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, Perturbation::new(3, 1), &SimulationConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stats_invariants() {
        let p = ModelParams::frozen(32, 1, 3.0f64).unwrap();
        let s = simulate(&p, Perturbation::NONE, &SimulationConfig::new(5_000, 0, 3)).unwrap();
        assert_eq!(s.histogram.iter().sum::<u64>(), s.epochs_recorded);
        assert!(s.flips <= s.epochs_recorded);
        let dist: Vec<f64> = s.distribution();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merge_is_concatenation() {
        let p = ModelParams::frozen(16, 1, 4.0f64).unwrap();
        let mut sim = Simulator::new(p, Perturbation::NONE, TieRule::Paper, None, replica_rng(5, 0)).unwrap();
        let mut a = sim.record(300);
        let b = sim.record(200);
        a.merge(&b);
        let mut whole = Simulator::new(p, Perturbation::NONE, TieRule::Paper, None, replica_rng(5, 0)).unwrap();
        assert_eq!(a, whole.record(500));
    }

    #[test]
    fn replicas_use_distinct_streams() {
        use rand::Rng;
        let a: u64 = replica_rng(1, 0).gen();
        let b: u64 = replica_rng(1, 1).gen();
        assert_ne!(a, b);
        assert_eq!(a, replica_rng(1, 0).gen::<u64>());
    }

    #[test]
    fn subcritical_run_absorbs() {
        let p = ModelParams::frozen(64, 2, 2.0f64).unwrap();
        let mut sim = Simulator::new(p, Perturbation::NONE, TieRule::Limit, None, replica_rng(11, 0)).unwrap();
        let t = sim.run_until_absorbed(1_000_000).expect("absorbs");
        assert!(t > 0);
        assert!(sim.state().n_plus() == 0 || sim.state().n_plus() == 64);
    }
}
