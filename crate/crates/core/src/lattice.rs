//! Lattice state and the single-site update rule.
//!
//! Spins live in a flat vector. Neighborhoods are fresh uniform draws of `2d`
//! distinct other sites at every epoch, so no torus geometry is needed.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{Beta, ModelParams, Perturbation, TieRule};
use crate::scalar::{logistic, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pin {
    Free,
    Plus,
    Minus,
}

impl Pin {
    pub fn is_free(self) -> bool {
        self == Pin::Free
    }
}

/// Spin configuration with its pinning mask and a cached `N⁺`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeState {
    spins: Vec<i8>,
    pinned: Vec<Pin>,
    n_plus: usize,
    epoch: u64,
}

/// Outcome of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepEvent {
    pub site: usize,
    pub old_spin: i8,
    pub new_spin: i8,
    /// `|ΔN⁺|`, 0 or 1.
    pub x_abs: u8,
    /// Signed change of `N⁺`.
    pub x_signed: i8,
}

impl LatticeState {
    /// Pins `k₊` and `k₋` randomly chosen sites; free spins are iid uniform ±1.
    pub fn random<R: Rng + ?Sized>(n_sites: usize, pert: Perturbation, rng: &mut R) -> Result<Self> {
        pert.validate(n_sites)?;
        let pinned = random_pin_mask(n_sites, pert, rng);
        let spins = pinned
            .iter()
            .map(|pin| match pin {
                Pin::Plus => 1,
                Pin::Minus => -1,
                Pin::Free => {
                    if rng.gen::<bool>() {
                        1
                    } else {
                        -1
                    }
                }
            })
            .collect();
        Ok(Self::from_parts(spins, pinned))
    }

    /// Like [`LatticeState::random`] but with exactly `n_plus` sites at +1 in total.
    pub fn with_n_plus<R: Rng + ?Sized>(
        n_sites: usize,
        pert: Perturbation,
        n_plus: usize,
        rng: &mut R,
    ) -> Result<Self> {
        pert.validate(n_sites)?;
        if n_plus < pert.k_plus || n_plus > n_sites - pert.k_minus {
            return Err(Error::Config(format!(
                "initial n_plus {n_plus} incompatible with {} pinned +1 and {} pinned -1 on {n_sites} sites",
                pert.k_plus, pert.k_minus
            )));
        }
        let pinned = random_pin_mask(n_sites, pert, rng);
        let free: Vec<usize> = (0..n_sites).filter(|&s| pinned[s].is_free()).collect();
        let free_plus = n_plus - pert.k_plus;
        let mut spins: Vec<i8> = pinned.iter().map(|p| if *p == Pin::Plus { 1 } else { -1 }).collect();
        for k in index::sample(rng, free.len(), free_plus).iter() {
            spins[free[k]] = 1;
        }
        Ok(Self::from_parts(spins, pinned))
    }

    /// Builds a state from explicit spins and pins. Pinned sites must carry their pinned spin.
    pub fn from_spins(spins: Vec<i8>, pinned: Vec<Pin>) -> Result<Self> {
        if spins.len() != pinned.len() {
            return Err(Error::Config("spins and pin mask differ in length".into()));
        }
        for (s, (&spin, &pin)) in spins.iter().zip(&pinned).enumerate() {
            if spin != 1 && spin != -1 {
                return Err(Error::Config(format!("spin at site {s} is {spin}, expected ±1")));
            }
            if (pin == Pin::Plus && spin != 1) || (pin == Pin::Minus && spin != -1) {
                return Err(Error::Config(format!("site {s} is pinned but carries spin {spin}")));
            }
        }
        Ok(Self::from_parts(spins, pinned))
    }

    fn from_parts(spins: Vec<i8>, pinned: Vec<Pin>) -> Self {
        let n_plus = spins.iter().filter(|&&s| s == 1).count();
        LatticeState { spins, pinned, n_plus, epoch: 0 }
    }

    pub fn n_sites(&self) -> usize {
        self.spins.len()
    }

    pub fn n_plus(&self) -> usize {
        self.n_plus
    }

    pub fn n_minus(&self) -> usize {
        self.spins.len() - self.n_plus
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn pins(&self) -> &[Pin] {
        &self.pinned
    }

    pub fn spin(&self, site: usize) -> i8 {
        self.spins[site]
    }

    /// `Σ_y η(y) = 2N⁺ − N`.
    pub fn magnetization(&self) -> i64 {
        2 * self.n_plus as i64 - self.spins.len() as i64
    }

    /// Re-derives every cached quantity and checks the pinning contract.
    pub fn audit(&self) -> Result<()> {
        let recount = self.spins.iter().filter(|&&s| s == 1).count();
        if recount != self.n_plus {
            return Err(Error::Domain(format!("cached n_plus {} != recount {recount}", self.n_plus)));
        }
        for (s, (&spin, &pin)) in self.spins.iter().zip(&self.pinned).enumerate() {
            if (pin == Pin::Plus && spin != 1) || (pin == Pin::Minus && spin != -1) {
                return Err(Error::Domain(format!("pinned site {s} has spin {spin}")));
            }
        }
        Ok(())
    }

    fn set_spin(&mut self, site: usize, spin: i8) {
        let old = self.spins[site];
        if old != spin {
            self.spins[site] = spin;
            if spin == 1 {
                self.n_plus += 1;
            } else {
                self.n_plus -= 1;
            }
        }
    }
}

fn random_pin_mask<R: Rng + ?Sized>(n_sites: usize, pert: Perturbation, rng: &mut R) -> Vec<Pin> {
    let mut pinned = vec![Pin::Free; n_sites];
    let chosen = index::sample(rng, n_sites, pert.pinned());
    for (rank, site) in chosen.iter().enumerate() {
        pinned[site] = if rank < pert.k_plus { Pin::Plus } else { Pin::Minus };
    }
    pinned
}

/// Draws `size` distinct sites other than `site`, uniformly over ordered tuples.
pub fn sample_neighborhood<R: Rng + ?Sized>(n_sites: usize, size: usize, site: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(size < n_sites, "neighborhood size checked at construction");
    index::sample(rng, n_sites - 1, size).iter().map(|k| if k >= site { k + 1 } else { k }).collect()
}

/// Interaction potential `h = Σ_{y∈nbhd} η(y) − α η(x) |Σ_y η(y)| / N`.
pub fn local_field<S: Scalar>(state: &LatticeState, site: usize, neighborhood: &[usize], params: &ModelParams<S>) -> S {
    let neighbor_sum: i64 = neighborhood.iter().map(|&y| state.spins[y] as i64).sum();
    global_field(neighbor_sum, state.spin(site), state.magnetization().unsigned_abs() as usize, params)
}

/// `h` from a neighbor spin sum, the focal spin and `|2N⁺ − N|`.
pub(crate) fn global_field<S: Scalar>(
    neighbor_sum: i64,
    spin: i8,
    abs_magnetization: usize,
    params: &ModelParams<S>,
) -> S {
    let global = params.alpha * S::of_usize(abs_magnetization) / S::of_usize(params.n_sites);
    let local = S::from_i64(neighbor_sum).expect("neighbor sum fits scalar");
    if spin > 0 {
        local - global
    } else {
        local + global
    }
}

/// Probability `p⁺` that the updated spin is +1.
///
/// For `Beta::Frozen` this is the pointwise limit: 1 for `h > 0`, 0 for `h < 0`
/// and exactly 1/2 at `h = 0`.
pub fn flip_probability<S: Scalar>(h: S, beta: Beta<S>) -> S {
    match beta {
        Beta::Finite(b) => logistic(S::of(2.0) * b * h),
        Beta::Frozen => {
            if h > S::zero() {
                S::one()
            } else if h < S::zero() {
                S::zero()
            } else {
                S::of(0.5)
            }
        }
    }
}

/// One epoch: pick a site uniformly; if free, redraw its neighborhood and resample its spin.
///
/// With `TieRule::Paper` a frozen-phase zero field keeps the current spin; with
/// `TieRule::Limit` it is a fair coin.
pub fn step<S: Scalar, R: Rng + ?Sized>(
    state: &mut LatticeState,
    params: &ModelParams<S>,
    tie_rule: TieRule,
    rng: &mut R,
) -> StepEvent {
    let n = state.n_sites();
    let site = rng.gen_range(0..n);
    let old_spin = state.spins[site];
    state.epoch += 1;
    if !state.pinned[site].is_free() {
        return StepEvent { site, old_spin, new_spin: old_spin, x_abs: 0, x_signed: 0 };
    }
    let neighborhood = sample_neighborhood(n, params.neighborhood_size(), site, rng);
    let h: S = local_field(state, site, &neighborhood, params);
    let new_spin = match params.beta {
        Beta::Frozen if h == S::zero() => match tie_rule {
            TieRule::Paper => old_spin,
            TieRule::Limit => {
                if rng.gen::<bool>() {
                    1
                } else {
                    -1
                }
            }
        },
        beta => {
            let p_plus = flip_probability(h, beta);
            if p_plus >= S::one() {
                1
            } else if p_plus <= S::zero() {
                -1
            } else {
                let u = S::of(rng.gen::<f64>());
                if u < p_plus {
                    1
                } else {
                    -1
                }
            }
        }
    };
    state.set_spin(site, new_spin);
    let x_signed = (new_spin - old_spin) / 2;
    StepEvent { site, old_spin, new_spin, x_abs: x_signed.unsigned_abs(), x_signed }
}

/// True when the state is a consensus configuration that no epoch can leave.
pub fn is_absorbing_consensus<S: Scalar>(state: &LatticeState, params: &ModelParams<S>, tie_rule: TieRule) -> bool {
    let n = state.n_sites();
    if state.n_plus != 0 && state.n_plus != n {
        return false;
    }
    if !params.beta.is_frozen() {
        return false;
    }
    let two_d = S::of_usize(params.neighborhood_size());
    // At consensus the focal site sees h = ±(2d − α), with the sign of its own spin.
    let margin = two_d - params.alpha;
    margin > S::zero() || (margin == S::zero() && tie_rule == TieRule::Paper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state_with(spins: &[i8]) -> LatticeState {
        LatticeState::from_spins(spins.to_vec(), vec![Pin::Free; spins.len()]).unwrap()
    }

    #[test]
    fn neighborhood_forced_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mut nb = sample_neighborhood(5, 4, 0, &mut rng);
            nb.sort_unstable();
            assert_eq!(nb, vec![1, 2, 3, 4]);
        }
    }

    #[test]
    fn neighborhood_distinct_and_excludes_site() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..1000 {
            let site = trial % 128;
            let nb = sample_neighborhood(128, 4, site, &mut rng);
            assert_eq!(nb.len(), 4);
            assert!(!nb.contains(&site));
            let mut sorted = nb.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 4);
            assert!(nb.iter().all(|&y| y < 128));
        }
    }

    #[test]
    fn neighbor_inclusion_frequency() {
        // Marginal inclusion probability of each other site is 2d/(N-1) = 2/7.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 1_000_000;
        let mut counts = [0u64; 8];
        for _ in 0..draws {
            for y in sample_neighborhood(8, 2, 0, &mut rng) {
                counts[y] += 1;
            }
        }
        assert_eq!(counts[0], 0);
        for &c in &counts[1..] {
            let freq = c as f64 / draws as f64;
            assert!((freq - 2.0 / 7.0).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn local_field_examples() {
        // All neighbours +1, zero magnetization: h = 2d.
        let mut spins = vec![1i8; 64];
        spins.extend(vec![-1i8; 64]);
        let st = state_with(&spins);
        let p = ModelParams::frozen(128, 2, 5.0f64).unwrap();
        assert_eq!(local_field(&st, 0, &[1, 2, 3, 4], &p), 4.0);

        // d=1, N=128, N⁺=96, α=5: h = 2 − 5·64/128.
        let mut spins = vec![1i8; 96];
        spins.extend(vec![-1i8; 32]);
        let st = state_with(&spins);
        let p = ModelParams::frozen(128, 1, 5.0f64).unwrap();
        assert_eq!(local_field(&st, 0, &[1, 2], &p), -0.5);

        // η(site) = −1, neighbours {+1, −1}, N=8, N⁺=5: h = 0 + 5·2/8.
        let st = state_with(&[1, 1, 1, 1, 1, -1, -1, -1]);
        let p = ModelParams::frozen(8, 1, 5.0f64).unwrap();
        assert_eq!(local_field(&st, 7, &[0, 5], &p), 1.25);
    }

    #[test]
    fn flip_probability_examples() {
        assert_eq!(flip_probability(0.0f64, Beta::Finite(3.0)), 0.5);
        assert_eq!(flip_probability(0.0f64, Beta::Frozen), 0.5);
        assert_eq!(flip_probability(3.0f64, Beta::Frozen), 1.0);
        assert_eq!(flip_probability(-3.0f64, Beta::Frozen), 0.0);
        let p = flip_probability(1.0f64, Beta::Finite(1.0));
        assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn pinned_site_never_changes() {
        let spins = vec![1i8, -1, -1, -1, -1, -1, -1, -1];
        let mut pins = vec![Pin::Free; 8];
        pins[0] = Pin::Plus;
        let mut st = LatticeState::from_spins(spins, pins).unwrap();
        let p = ModelParams::frozen(8, 1, 5.0f64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pinned_hits = 0;
        for _ in 0..2000 {
            let ev = step(&mut st, &p, TieRule::Limit, &mut rng);
            if ev.site == 0 {
                pinned_hits += 1;
                assert_eq!(ev.new_spin, ev.old_spin);
                assert_eq!(ev.x_abs, 0);
            }
            assert_eq!(st.spin(0), 1);
        }
        assert!(pinned_hits > 0);
        assert_eq!(st.epoch(), 2000);
        st.audit().unwrap();
    }

    #[test]
    fn subcritical_consensus_is_absorbing() {
        let p = ModelParams::frozen(16, 2, 3.0f64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for tie in [TieRule::Paper, TieRule::Limit] {
            let mut st = state_with(&[1; 16]);
            assert!(is_absorbing_consensus(&st, &p, tie));
            for _ in 0..5000 {
                let ev = step(&mut st, &p, tie, &mut rng);
                assert_eq!(ev.x_abs, 0);
            }
            assert_eq!(st.n_plus(), 16);
        }
    }

    #[test]
    fn critical_consensus_depends_on_tie_rule() {
        // α = 2d: the consensus field is exactly zero.
        let p = ModelParams::frozen(16, 2, 4.0f64).unwrap();
        let st = state_with(&[1; 16]);
        assert!(is_absorbing_consensus(&st, &p, TieRule::Paper));
        assert!(!is_absorbing_consensus(&st, &p, TieRule::Limit));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut paper = st.clone();
        for _ in 0..2000 {
            step(&mut paper, &p, TieRule::Paper, &mut rng);
        }
        assert_eq!(paper.n_plus(), 16);
        let mut limit = st;
        let moved = (0..2000).any(|_| step(&mut limit, &p, TieRule::Limit, &mut rng).x_abs == 1);
        assert!(moved);
    }

    #[test]
    fn frozen_stay_probability_by_simulation() {
        // N=8, d=1, α=5, N⁺=5: a free +1 site stays +1 with probability 6/21 = 2/7.
        let p = ModelParams::frozen(8, 1, 5.0f64).unwrap();
        let base = state_with(&[1, 1, 1, 1, 1, -1, -1, -1]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut plus_trials, mut stays) = (0u64, 0u64);
        while plus_trials < 200_000 {
            let mut st = base.clone();
            let ev = step(&mut st, &p, TieRule::Paper, &mut rng);
            if ev.old_spin == 1 {
                plus_trials += 1;
                if ev.new_spin == 1 {
                    stays += 1;
                }
            }
        }
        let freq = stays as f64 / plus_trials as f64;
        assert!((freq - 2.0 / 7.0).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn with_n_plus_places_exact_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st = LatticeState::with_n_plus(20, Perturbation::new(3, 2), 10, &mut rng).unwrap();
        assert_eq!(st.n_plus(), 10);
        assert_eq!(st.pins().iter().filter(|p| **p == Pin::Plus).count(), 3);
        assert_eq!(st.pins().iter().filter(|p| **p == Pin::Minus).count(), 2);
        st.audit().unwrap();
        assert!(LatticeState::with_n_plus(20, Perturbation::new(3, 2), 2, &mut rng).is_err());
        assert!(LatticeState::with_n_plus(20, Perturbation::new(3, 2), 19, &mut rng).is_err());
    }

    #[test]
    fn from_spins_rejects_inconsistent_pins() {
        assert!(LatticeState::from_spins(vec![-1, 1], vec![Pin::Plus, Pin::Free]).is_err());
        assert!(LatticeState::from_spins(vec![0, 1], vec![Pin::Free, Pin::Free]).is_err());
    }
}
