//! Closed-form frozen-phase analytics.
//!
//! With neighborhoods redrawn every epoch, `N⁺` is itself a birth–death chain.
//! In the β → ∞ limit a spin survives its update iff its neighbor count lies on
//! the stable side of a threshold set by the global imbalance, which gives the
//! hypergeometric stay probabilities `P₊₊`, `P₋₋` and the product-form invariant
//! measure over the number of free +1 sites.
//!
//! Indexing: `i` is the total `N⁺` (pinned sites included), `ℓ` the number of free
//! +1 sites, so `i = k₊ + ℓ` with `ℓ ∈ 0..=M`, `M = N − k₊ − k₋`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSummary;
use crate::params::{ModelParams, Perturbation, Spin};
use crate::scalar::{ln_choose, log_sum_exp, logistic, neumaier_sum, Scalar};

/// Stability threshold at a given `N⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Threshold {
    /// `c = ⌈α |i/N − 1/2|⌉`.
    pub c: usize,
    /// `α |i/N − 1/2|` is an integer, so the boundary neighbor count gives `h = 0`.
    pub tie: bool,
    /// `α |i/N − 1/2| ≤ d`, i.e. `i` lies in the band.
    pub in_band: bool,
}

fn rational_alpha<S: Scalar>(params: &ModelParams<S>) -> BigRational {
    let alpha = params.alpha.to_f64().expect("alpha representable as f64");
    BigRational::from_float(alpha).expect("alpha validated finite")
}

/// Evaluated in exact rational arithmetic so integral boundaries are never misclassified.
pub fn threshold<S: Scalar>(i: usize, params: &ModelParams<S>) -> Threshold {
    let n = params.n_sites;
    let imbalance = BigInt::from((2 * i).abs_diff(n));
    let x = rational_alpha(params) * BigRational::new(imbalance, BigInt::from(2 * n));
    let c = x.ceil().to_integer().to_usize().expect("threshold fits usize");
    Threshold { c, tie: x.is_integer(), in_band: x <= BigRational::from_integer(BigInt::from(params.dim)) }
}

pub fn threshold_c<S: Scalar>(i: usize, params: &ModelParams<S>) -> usize {
    threshold(i, params).c
}

/// `[N(1/2 − d/α), N(1/2 + d/α)]` clamped to `[0, N]`; the whole range when `α ≤ 2d`.
pub fn band<S: Scalar>(params: &ModelParams<S>) -> (S, S) {
    let n = S::of_usize(params.n_sites);
    if params.alpha <= S::of_usize(2 * params.dim) {
        return (S::zero(), n);
    }
    let half = S::of(0.5);
    let w = S::of_usize(params.dim) / params.alpha;
    ((n * (half - w)).max(S::zero()), (n * (half + w)).min(n))
}

fn check_j<S: Scalar>(j: usize, params: &ModelParams<S>) -> Result<()> {
    if j > 2 * params.dim {
        return Err(Error::Domain(format!("neighbor count {j} exceeds 2d = {}", 2 * params.dim)));
    }
    Ok(())
}

fn hypergeometric<S: Scalar>(same: usize, other: usize, j: usize, params: &ModelParams<S>) -> S {
    let two_d = params.neighborhood_size();
    if j > same || two_d - j > other {
        return S::zero();
    }
    (ln_choose::<S>(same, j) + ln_choose::<S>(other, two_d - j) - ln_choose::<S>(params.n_sites - 1, two_d)).exp()
}

/// Probability that a +1 site at `N⁺ = i` sees exactly `j` +1 neighbors.
pub fn f_plus<S: Scalar>(i: usize, j: usize, params: &ModelParams<S>) -> Result<S> {
    let n = params.n_sites;
    if i == 0 || i > n {
        return Err(Error::Domain(format!("f_plus needs 1 <= i <= N, got i = {i}")));
    }
    check_j(j, params)?;
    Ok(hypergeometric(i - 1, n - i, j, params))
}

/// Probability that a -1 site at `N⁺ = i` sees exactly `j` +1 neighbors.
pub fn f_minus<S: Scalar>(i: usize, j: usize, params: &ModelParams<S>) -> Result<S> {
    let n = params.n_sites;
    if i >= n {
        return Err(Error::Domain(format!("f_minus needs 0 <= i <= N-1, got i = {i}")));
    }
    check_j(j, params)?;
    Ok(hypergeometric(i, n - i - 1, j, params))
}

fn check_spin_domain<S: Scalar>(i: usize, spin: Spin, params: &ModelParams<S>) -> Result<()> {
    let n = params.n_sites;
    match spin {
        Spin::Plus if i == 0 || i > n => Err(Error::Domain(format!("no +1 site exists at N+ = {i}"))),
        Spin::Minus if i >= n => Err(Error::Domain(format!("no -1 site exists at N+ = {i}"))),
        _ => Ok(()),
    }
}

fn sum_f<S: Scalar>(i: usize, spin: Spin, lo: isize, hi: isize, params: &ModelParams<S>) -> S {
    let lo = lo.max(0);
    let hi = hi.min(2 * params.dim as isize);
    if lo > hi {
        return S::zero();
    }
    neumaier_sum((lo as usize..=hi as usize).map(|j| match spin {
        Spin::Plus => f_plus(i, j, params).expect("domain checked"),
        Spin::Minus => f_minus(i, j, params).expect("domain checked"),
    }))
}

/// Frozen-phase probability that a `spin` site at `N⁺ = i` keeps its spin when tested.
///
/// Zero outside the band. Inside, +1 sums `f₊(i, j)` for `j` from `(d + c) ∨ (i + 2d − N)`
/// to `2d ∧ i`, and -1 sums `f₋(i, j)` for `j` from `0 ∨ (i + 2d − N)` to `(d − c) ∧ i`.
/// The boundary term where `h = 0` counts as stable.
pub fn p_stay<S: Scalar>(i: usize, spin: Spin, params: &ModelParams<S>) -> Result<S> {
    check_spin_domain(i, spin, params)?;
    let th = threshold(i, params);
    if !th.in_band {
        return Ok(S::zero());
    }
    let (n, d, c, i_) = (params.n_sites as isize, params.dim as isize, th.c as isize, i as isize);
    let two_d = 2 * d;
    Ok(match spin {
        Spin::Plus => sum_f(i, spin, (d + c).max(i_ + two_d - n), two_d.min(i_), params),
        Spin::Minus => sum_f(i, spin, (i_ + two_d - n).max(0), (d - c).min(i_), params),
    })
}

/// `1 − p_stay`, summed over the complementary neighbor counts so that it keeps
/// full relative precision when the stay probability is close to one.
pub fn p_leave<S: Scalar>(i: usize, spin: Spin, params: &ModelParams<S>) -> Result<S> {
    check_spin_domain(i, spin, params)?;
    let th = threshold(i, params);
    if !th.in_band {
        return Ok(S::one());
    }
    let (n, d, c, i_) = (params.n_sites as isize, params.dim as isize, th.c as isize, i as isize);
    let two_d = 2 * d;
    Ok(match spin {
        Spin::Plus => sum_f(i, spin, (i_ + two_d - n).max(0), (d + c - 1).min(i_ - 1), params),
        Spin::Minus => sum_f(i, spin, (d - c + 1).max(i_ + two_d - n + 1), two_d.min(i_), params),
    })
}

/// Field felt by a `spin` site with `j` +1 neighbors at `N⁺ = i`.
fn field_at<S: Scalar>(i: usize, j: usize, spin: Spin, params: &ModelParams<S>) -> S {
    let n = params.n_sites;
    let global = params.alpha * S::of_usize((2 * i).abs_diff(n)) / S::of_usize(n);
    let local = S::of_usize(2 * j) - S::of_usize(2 * params.dim);
    match spin {
        Spin::Plus => local - global,
        Spin::Minus => local + global,
    }
}

/// Finite-temperature stay probability: `Σ_j f±(i, j) · r(h(i, j))` with `r` the
/// Glauber probability of drawing the current spin again.
pub fn p_stay_beta<S: Scalar>(i: usize, spin: Spin, beta: S, params: &ModelParams<S>) -> Result<S> {
    check_spin_domain(i, spin, params)?;
    if !beta.is_finite() || beta < S::zero() {
        return Err(Error::Domain(format!("finite beta required, got {beta}")));
    }
    let two = S::of(2.0);
    let terms = (0..=params.neighborhood_size()).map(|j| {
        let f = match spin {
            Spin::Plus => f_plus(i, j, params).expect("domain checked"),
            Spin::Minus => f_minus(i, j, params).expect("domain checked"),
        };
        let h = field_at(i, j, spin, params);
        let retain = match spin {
            Spin::Plus => logistic(two * beta * h),
            Spin::Minus => logistic(-two * beta * h),
        };
        f * retain
    });
    Ok(neumaier_sum(terms))
}

/// Stay probability under the exact-limit tie rule: the `h = 0` term has weight 1/2.
pub fn p_stay_limit<S: Scalar>(i: usize, spin: Spin, params: &ModelParams<S>) -> Result<S> {
    Ok(p_stay(i, spin, params)? - tie_gap(i, spin, params)?)
}

/// `p_stay − p_stay_limit`: half the mass of the tie term, zero when no tie exists.
pub fn tie_gap<S: Scalar>(i: usize, spin: Spin, params: &ModelParams<S>) -> Result<S> {
    check_spin_domain(i, spin, params)?;
    let th = threshold(i, params);
    if !th.tie || !th.in_band {
        return Ok(S::zero());
    }
    let half = S::of(0.5);
    Ok(match spin {
        Spin::Plus => half * f_plus(i, params.dim + th.c, params)?,
        Spin::Minus => half * f_minus(i, params.dim - th.c, params)?,
    })
}

/// Invariant distribution of the free +1 count, with its log-weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenMeasure<S> {
    pub params: ModelParams<S>,
    pub pert: Perturbation,
    /// `ln g(ℓ)` for `ℓ = 0..=M`, with `ln g(0) = 0`.
    pub log_g: Vec<S>,
    /// `π(ℓ)` for `ℓ = 0..=M`.
    pub probs: Vec<S>,
}

impl<S: Scalar> FrozenMeasure<S> {
    /// `M`, the number of free sites.
    pub fn free_sites(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn n_plus_of(&self, ell: usize) -> usize {
        self.pert.k_plus + ell
    }

    /// `π` indexed by total `N⁺`; zero outside `k₊..=N − k₋`.
    pub fn prob_n_plus(&self, n_plus: usize) -> S {
        n_plus.checked_sub(self.pert.k_plus).and_then(|ell| self.probs.get(ell).copied()).unwrap_or_else(S::zero)
    }

    /// The distribution over `N⁺ = 0..=N`.
    pub fn by_n_plus(&self) -> Vec<S> {
        (0..=self.params.n_sites).map(|i| self.prob_n_plus(i)).collect()
    }

    pub fn mean_n_plus(&self) -> S {
        neumaier_sum(self.probs.iter().enumerate().map(|(ell, &p)| S::of_usize(self.n_plus_of(ell)) * p))
    }

    /// Mass on `lo ≤ N⁺ ≤ hi` for real bounds.
    pub fn mass_between(&self, lo: S, hi: S) -> S {
        neumaier_sum(self.probs.iter().enumerate().filter_map(|(ell, &p)| {
            let i = S::of_usize(self.n_plus_of(ell));
            (i >= lo && i <= hi).then_some(p)
        }))
    }

    pub fn total_mass(&self) -> S {
        neumaier_sum(self.probs.iter().copied())
    }
}

/// Product-form invariant measure
/// `π(ℓ) ∝ C(M, ℓ) Π_{j<ℓ} (1 − P₋₋(k₊ + j)) / (1 − P₊₊(k₊ + j + 1))`.
pub fn invariant_measure<S: Scalar>(params: &ModelParams<S>, pert: Perturbation) -> Result<FrozenMeasure<S>> {
    params.validate()?;
    pert.validate(params.n_sites)?;
    if !params.beta.is_frozen() {
        return Err(Error::Domain(
            "the closed-form measure is the frozen-phase limit; use the chain oracle for finite beta".into(),
        ));
    }
    let m = pert.free_sites(params.n_sites);
    let mut log_g = Vec::with_capacity(m + 1);
    let mut log_ratio_sum = S::zero();
    log_g.push(S::zero());
    for j in 0..m {
        let up = p_leave(pert.k_plus + j, Spin::Minus, params)?;
        let down = p_leave(pert.k_plus + j + 1, Spin::Plus, params)?;
        if down == S::zero() {
            return Err(Error::DegenerateWeight { ell: j + 1, n_plus: pert.k_plus + j + 1 });
        }
        log_ratio_sum = log_ratio_sum + up.ln() - down.ln();
        log_g.push(ln_choose::<S>(m, j + 1) + log_ratio_sum);
    }
    let log_norm = log_sum_exp(&log_g);
    let weights: Vec<S> = log_g.iter().map(|&lg| (lg - log_norm).exp()).collect();
    // Second pass absorbs the rounding left in the exponentials.
    let total = neumaier_sum(weights.iter().copied());
    let probs = weights.into_iter().map(|w| w / total).collect();
    Ok(FrozenMeasure { params: *params, pert, log_g, probs })
}

/// One-epoch birth and death probabilities of the free +1 count at `ℓ`.
pub(crate) fn birth_death_at<S: Scalar>(measure: &FrozenMeasure<S>, ell: usize) -> (S, S) {
    let params = &measure.params;
    let n = S::of_usize(params.n_sites);
    let m = measure.free_sites();
    let i = measure.n_plus_of(ell);
    let birth = if ell < m {
        S::of_usize(m - ell) / n * p_leave(i, Spin::Minus, params).expect("i < N when a free -1 site exists")
    } else {
        S::zero()
    };
    let death = if ell > 0 {
        S::of_usize(ell) / n * p_leave(i, Spin::Plus, params).expect("i >= 1 when a free +1 site exists")
    } else {
        S::zero()
    };
    (birth, death)
}

/// Stationary moments from the birth–death structure; valid for any perturbation.
pub fn moments_general<S: Scalar>(measure: &FrozenMeasure<S>) -> MomentSummary<S> {
    let n = measure.params.n_sites;
    let rates: Vec<(S, S)> = (0..measure.probs.len()).map(|ell| birth_death_at(measure, ell)).collect();
    let ex2 = neumaier_sum(measure.probs.iter().zip(&rates).map(|(&p, &(b, d))| p * (b + d)));
    let mean_signed = neumaier_sum(measure.probs.iter().zip(&rates).map(|(&p, &(b, d))| p * (b - d)));
    let y = |ell: usize| S::of_usize((2 * measure.n_plus_of(ell)).abs_diff(n));
    let mean_y = neumaier_sum(measure.probs.iter().enumerate().map(|(ell, &p)| p * y(ell)));
    let ey2 = neumaier_sum(measure.probs.iter().enumerate().map(|(ell, &p)| p * y(ell) * y(ell)));
    MomentSummary::from_raw(mean_signed, ex2, mean_y, ey2)
}

/// The four moment formulas for the unperturbed process, evaluated literally:
/// `E[X] = 0`, `E[X²] = 1 − (2/N) Σ i π(i) P₊₊(i)`,
/// `E[Y] = N (1 − π(N/2)) − 4 Σ_{i<N/2} i π(i)` and `E[Y²] = 4 Σ i² π(i) − N²`.
pub fn moments_prop2<S: Scalar>(measure: &FrozenMeasure<S>) -> Result<MomentSummary<S>> {
    let params = &measure.params;
    let n = params.n_sites;
    if !measure.pert.is_none() {
        return Err(Error::Domain(
            "the symmetric moment formulas hold only without pinned sites; use moments_general".into(),
        ));
    }
    if !n.is_multiple_of(2) {
        return Err(Error::Domain(format!("the symmetric moment formulas need even N, got {n}")));
    }
    let pi = |i: usize| measure.prob_n_plus(i);
    let nn = S::of_usize(n);
    let stay_sum =
        neumaier_sum((1..=n).map(|i| S::of_usize(i) * pi(i) * p_stay(i, Spin::Plus, params).expect("1 <= i <= N")));
    let ex2 = S::one() - S::of(2.0) / nn * stay_sum;
    let lower = neumaier_sum((0..n / 2).map(|i| S::of_usize(i) * pi(i)));
    let mean_y = nn * (S::one() - pi(n / 2)) - S::of(4.0) * lower;
    let second = neumaier_sum((0..=n).map(|i| S::of_usize(i * i) * pi(i)));
    let ey2 = S::of(4.0) * second - nn * nn;
    Ok(MomentSummary::from_raw(S::zero(), ex2, mean_y, ey2))
}

/// `σ_X · σ_Y` of the frozen invariant measure under `pert`.
pub fn residual_uncertainty<S: Scalar>(params: &ModelParams<S>, pert: Perturbation) -> Result<S> {
    Ok(moments_general(&invariant_measure(params, pert)?).uncertainty)
}

/// `|α|2i−N|/N|` as a rational, exposed for reporting.
pub fn global_term_exact<S: Scalar>(i: usize, params: &ModelParams<S>) -> BigRational {
    let n = params.n_sites;
    (rational_alpha(params) * BigRational::new(BigInt::from((2 * i).abs_diff(n)), BigInt::from(n))).abs()
}

/// Whether the global term vanishes at `i` (no imbalance).
pub fn is_balanced<S: Scalar>(i: usize, params: &ModelParams<S>) -> bool {
    global_term_exact(i, params).is_zero()
}
