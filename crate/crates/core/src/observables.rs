//! Price, volume and volatility read off the plus-spin count.

use crate::params::ModelParams;
use crate::scalar::Scalar;

/// `p = p* · exp(λ (2N⁺ − N) / N)`.
pub fn price<S: Scalar>(n_plus: usize, params: &ModelParams<S>) -> S {
    let n = params.n_sites;
    debug_assert!(n_plus <= n);
    let magnetization = S::of_usize(2 * n_plus) - S::of_usize(n);
    params.p_star * (params.lambda * magnetization / S::of_usize(n)).exp()
}

/// `V = max(N⁺, N⁻)`.
pub fn volume(n_plus: usize, n_sites: usize) -> usize {
    debug_assert!(n_plus <= n_sites);
    n_plus.max(n_sites - n_plus)
}

/// `Y = |2N⁺ − N|`.
pub fn imbalance(n_plus: usize, n_sites: usize) -> usize {
    (2 * n_plus).abs_diff(n_sites)
}

/// Conditional standard deviation of the one-epoch log-return, `(2λ/N) √(q (1 − q))`
/// for flip probability `q`.
pub fn conditional_volatility<S: Scalar>(flip_prob: S, params: &ModelParams<S>) -> S {
    let two = S::of(2.0);
    let q = flip_prob.max(S::zero()).min(S::one());
    two * params.lambda / S::of_usize(params.n_sites) * (q * (S::one() - q)).sqrt()
}
