//! Independent check of the closed form: the birth–death chain followed by `N⁺`,
//! built by exact enumeration of neighbor counts and solved two ways.
//!
//! Transition probabilities here do not go through the threshold/range logic of
//! [`crate::frozen`]. Each neighbor count `j` is weighted by an exact rational
//! hypergeometric mass and its local field is evaluated exactly, then classified
//! by sign (frozen phase) or pushed through the logistic (finite β).

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSummary;
use crate::params::{Beta, ModelParams, Perturbation, Spin, TieRule};
use crate::scalar::{logistic, neumaier_sum, Scalar};

/// Birth–death chain on the free +1 count `ℓ = 0..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirthDeathChain<S> {
    pub m: usize,
    /// One-epoch probability that `ℓ` increases.
    pub birth: Vec<S>,
    /// One-epoch probability that `ℓ` decreases.
    pub death: Vec<S>,
    pub n_sites: usize,
    pub pert: Perturbation,
}

impl<S: Scalar> BirthDeathChain<S> {
    /// Builds a chain directly from rate vectors (both of length `m + 1`).
    pub fn from_rates(birth: Vec<S>, death: Vec<S>, n_sites: usize, pert: Perturbation) -> Result<Self> {
        if birth.len() != death.len() || birth.is_empty() {
            return Err(Error::Domain("birth and death vectors must be nonempty and of equal length".into()));
        }
        let m = birth.len() - 1;
        if birth[m] != S::zero() || death[0] != S::zero() {
            return Err(Error::Domain("chain must satisfy b(m) = 0 and d(0) = 0".into()));
        }
        for (ell, (&b, &d)) in birth.iter().zip(&death).enumerate() {
            if b < S::zero() || d < S::zero() || b + d > S::one() + S::epsilon() {
                return Err(Error::Domain(format!("invalid rates at {ell}: b = {b}, d = {d}")));
            }
        }
        Ok(BirthDeathChain { m, birth, death, n_sites, pert })
    }

    /// Communicating classes as inclusive ranges, with a flag for closedness.
    pub fn classes(&self) -> Vec<((usize, usize), bool)> {
        let mut out = Vec::new();
        let mut lo = 0;
        for ell in 0..=self.m {
            let linked = ell < self.m && self.birth[ell] > S::zero() && self.death[ell + 1] > S::zero();
            if !linked {
                let hi = ell;
                let closed_above = hi == self.m || self.birth[hi] == S::zero();
                let closed_below = lo == 0 || self.death[lo] == S::zero();
                out.push(((lo, hi), closed_above && closed_below));
                lo = ell + 1;
            }
        }
        out
    }

    /// The unique closed class, or the list of absorbing components when there are several.
    pub fn recurrent_class(&self) -> Result<(usize, usize)> {
        let closed: Vec<(usize, usize)> = self.classes().into_iter().filter(|(_, c)| *c).map(|(r, _)| r).collect();
        match closed.as_slice() {
            [only] => Ok(*only),
            _ => Err(Error::Reducible { classes: closed }),
        }
    }
}

fn big_binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        BigInt::zero()
    } else {
        binomial(BigInt::from(n), BigInt::from(k))
    }
}

/// Probability that a `spin` site at `N⁺ = i` changes sign when tested.
fn leave_probability<S: Scalar>(
    params: &ModelParams<S>,
    alpha: &BigRational,
    i: usize,
    spin: Spin,
    beta: Beta<S>,
    tie_rule: TieRule,
) -> S {
    let n = params.n_sites;
    let two_d = params.neighborhood_size();
    let (same_plus, other_minus) = match spin {
        Spin::Plus => (i - 1, n - i),
        Spin::Minus => (i, n - i - 1),
    };
    let total = big_binomial(n - 1, two_d);
    let global = alpha * BigRational::new(BigInt::from((2 * i).abs_diff(n)), BigInt::from(n));
    let half = BigRational::new(BigInt::one(), BigInt::from(2));

    let mut exact = BigRational::zero();
    let mut approx = Vec::with_capacity(two_d + 1);
    for j in 0..=two_d {
        let count = big_binomial(same_plus, j) * big_binomial(other_minus, two_d - j);
        if count.is_zero() {
            continue;
        }
        let weight = BigRational::new(count, total.clone());
        let local = BigRational::from_integer(BigInt::from(2 * j as i64 - two_d as i64));
        // Field oriented so that a positive value favours keeping `spin`.
        let oriented = match spin {
            Spin::Plus => local - &global,
            Spin::Minus => -(local + &global),
        };
        match beta {
            Beta::Frozen => {
                if oriented.is_negative() {
                    exact += weight;
                } else if oriented.is_zero() && tie_rule == TieRule::Limit {
                    exact += weight * &half;
                }
            }
            Beta::Finite(b) => {
                let h = S::of(oriented.to_f64().expect("field representable"));
                let w = S::of(weight.to_f64().expect("weight representable"));
                approx.push(w * logistic(-S::of(2.0) * b * h));
            }
        }
    }
    match beta {
        Beta::Frozen => S::of(exact.to_f64().expect("probability representable")),
        Beta::Finite(_) => neumaier_sum(approx),
    }
}

/// Exact one-epoch transition law of the free +1 count.
///
/// `tie_rule` only matters for `Beta::Frozen`; with `Paper` a zero field keeps the spin.
pub fn build_chain<S: Scalar>(
    params: &ModelParams<S>,
    pert: Perturbation,
    beta: Beta<S>,
    tie_rule: TieRule,
) -> Result<BirthDeathChain<S>> {
    params.validate()?;
    pert.validate(params.n_sites)?;
    let n = params.n_sites;
    let m = pert.free_sites(n);
    let alpha = BigRational::from_float(params.alpha.to_f64().expect("alpha as f64")).expect("finite alpha");
    let nn = S::of_usize(n);
    let mut birth = Vec::with_capacity(m + 1);
    let mut death = Vec::with_capacity(m + 1);
    for ell in 0..=m {
        let i = pert.k_plus + ell;
        birth.push(if ell < m {
            S::of_usize(m - ell) / nn * leave_probability(params, &alpha, i, Spin::Minus, beta, tie_rule)
        } else {
            S::zero()
        });
        death.push(if ell > 0 {
            S::of_usize(ell) / nn * leave_probability(params, &alpha, i, Spin::Plus, beta, tie_rule)
        } else {
            S::zero()
        });
    }
    BirthDeathChain::from_rates(birth, death, n, pert)
}

/// Detailed-balance solution `π(ℓ+1)/π(ℓ) = b(ℓ)/d(ℓ+1)` in log space, on the
/// recurrent class.
pub fn product_form<S: Scalar>(chain: &BirthDeathChain<S>) -> Result<Vec<S>> {
    let (lo, hi) = chain.recurrent_class()?;
    let mut log_w = vec![S::neg_infinity(); chain.m + 1];
    log_w[lo] = S::zero();
    for ell in lo..hi {
        log_w[ell + 1] = log_w[ell] + chain.birth[ell].ln() - chain.death[ell + 1].ln();
    }
    let max = log_w[lo..=hi].iter().copied().fold(S::neg_infinity(), S::max);
    let weights: Vec<S> = log_w.iter().map(|&lw| (lw - max).exp()).collect();
    let z = neumaier_sum(weights.iter().copied());
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Solves `π (P − I) = 0`, `Σ π = 1` by Gaussian elimination with partial pivoting.
pub fn null_space<S: Scalar>(chain: &BirthDeathChain<S>) -> Result<Vec<S>> {
    chain.recurrent_class()?;
    let size = chain.m + 1;
    // a[r][c] = (P − I)[c][r]
    let mut a = vec![vec![S::zero(); size]; size];
    for ell in 0..size {
        let b = chain.birth[ell];
        let d = chain.death[ell];
        a[ell][ell] = -(b + d);
        if ell + 1 < size {
            a[ell + 1][ell] = b;
        }
        if ell > 0 {
            a[ell - 1][ell] = d;
        }
    }
    let mut rhs = vec![S::zero(); size];
    a[size - 1] = vec![S::one(); size];
    rhs[size - 1] = S::one();

    for col in 0..size {
        let pivot = (col..size)
            .max_by(|&x, &y| a[x][col].abs().partial_cmp(&a[y][col].abs()).expect("finite entries"))
            .expect("nonempty range");
        if a[pivot][col] == S::zero() {
            return Err(Error::Domain(format!("singular generator at column {col}")));
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..size {
            let factor = a[row][col] / a[col][col];
            if factor == S::zero() {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (target, &v) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *target = *target - factor * v;
            }
            rhs[row] = rhs[row] - factor * rhs[col];
        }
    }
    let mut x = vec![S::zero(); size];
    for row in (0..size).rev() {
        let tail = neumaier_sum((row + 1..size).map(|k| a[row][k] * x[k]));
        x[row] = (rhs[row] - tail) / a[row][row];
    }
    // Transient states come out as rounding noise around zero.
    Ok(x.into_iter().map(|v| v.max(S::zero())).collect())
}

/// Stationary distribution, cross-checked between the two solvers.
pub fn stationary_solve<S: Scalar>(chain: &BirthDeathChain<S>) -> Result<Vec<S>> {
    let product = product_form(chain)?;
    let linear = null_space(chain)?;
    let diff = max_abs_diff(&product, &linear)?;
    if diff > S::solver_tolerance() {
        return Err(Error::SolverDisagreement { max_diff: diff.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(product)
}

/// Moments of `X` and `Y` under `distribution` on `chain`.
pub fn stationary_moments<S: Scalar>(chain: &BirthDeathChain<S>, distribution: &[S]) -> Result<MomentSummary<S>> {
    if distribution.len() != chain.m + 1 {
        return Err(Error::Domain(format!(
            "distribution has {} entries, chain has {} states",
            distribution.len(),
            chain.m + 1
        )));
    }
    let n = chain.n_sites;
    let y = |ell: usize| S::of_usize((2 * (chain.pert.k_plus + ell)).abs_diff(n));
    let states = || distribution.iter().enumerate();
    let ex2 = neumaier_sum(states().map(|(ell, &p)| p * (chain.birth[ell] + chain.death[ell])));
    let signed = neumaier_sum(states().map(|(ell, &p)| p * (chain.birth[ell] - chain.death[ell])));
    let mean_y = neumaier_sum(states().map(|(ell, &p)| p * y(ell)));
    let ey2 = neumaier_sum(states().map(|(ell, &p)| p * y(ell) * y(ell)));
    Ok(MomentSummary::from_raw(signed, ex2, mean_y, ey2))
}

/// `½ Σ |p − q|`.
pub fn total_variation<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    Ok(S::of(0.5) * neumaier_sum(p.iter().zip(q).map(|(&a, &b)| (a - b).abs())))
}

pub fn max_abs_diff<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).fold(S::zero(), S::max))
}

/// Largest violation of `π(ℓ) b(ℓ) = π(ℓ+1) d(ℓ+1)`.
pub fn detailed_balance_residual<S: Scalar>(chain: &BirthDeathChain<S>, distribution: &[S]) -> S {
    (0..chain.m)
        .map(|ell| (distribution[ell] * chain.birth[ell] - distribution[ell + 1] * chain.death[ell + 1]).abs())
        .fold(S::zero(), S::max)
}
