//! Scalar abstraction and the log-space numerics shared by the analytics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Agreement tolerance between the two stationary solvers.
    fn solver_tolerance() -> Self;

    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }
}

impl Scalar for f32 {
    fn solver_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn solver_tolerance() -> Self {
        1e-12
    }
}

// Lanczos approximation with g = 10.900511 (Godfrey coefficients), accurate to
// about 15 significant digits in double precision.
const LANCZOS_R: f64 = 10.900511;
const LN_2_SQRT_E_OVER_PI: f64 = 0.620_782_237_635_245_2;
const LANCZOS_DK: [f64; 11] = [
    2.485_740_891_387_535_5e-5,
    1.051_423_785_817_219_7,
    -3.456_870_972_220_162_5,
    4.512_277_094_668_948,
    -2.982_852_253_235_766_4,
    1.056_397_115_771_267,
    -1.954_287_731_916_458_7e-1,
    1.709_705_434_044_412e-2,
    -5.719_261_174_043_057e-4,
    4.633_994_733_599_057e-6,
    -2.719_949_084_886_077_2e-9,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma<S: Scalar>(x: S) -> S {
    debug_assert!(x > S::zero(), "ln_gamma is only used on positive arguments");
    let half = S::of(0.5);
    let series = LANCZOS_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(S::of(LANCZOS_DK[0]), |acc, (k, &dk)| acc + S::of(dk) / (x + S::of_usize(k) - S::one()));
    series.ln() + S::of(LN_2_SQRT_E_OVER_PI) + (x - half) * ((x - half + S::of(LANCZOS_R)) / S::E()).ln()
}

/// `ln C(n, k)`; negative infinity when `k > n`.
///
/// Short products are summed as `Σ ln((n − k + t) / t)`, which keeps full relative
/// precision; long ones fall back to log-gamma.
pub fn ln_choose<S: Scalar>(n: usize, k: usize) -> S {
    if k > n {
        return S::neg_infinity();
    }
    let k = k.min(n - k);
    if k == 0 {
        return S::zero();
    }
    if k <= SHORT_PRODUCT {
        let base = n - k;
        return neumaier_sum((1..=k).map(|t| (S::of_usize(base + t) / S::of_usize(t)).ln()));
    }
    let one = S::one();
    ln_gamma(S::of_usize(n) + one) - ln_gamma(S::of_usize(k) + one) - ln_gamma(S::of_usize(n - k) + one)
}

const SHORT_PRODUCT: usize = 64;

/// `ln Σ exp(x_i)`, ignoring `-inf` entries. Returns `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() {
        return max;
    }
    let total = neumaier_sum(xs.iter().map(|&x| (x - max).exp()));
    max + total.ln()
}

/// Compensated summation.
pub fn neumaier_sum<S: Scalar, I: IntoIterator<Item = S>>(values: I) -> S {
    let mut sum = S::zero();
    let mut comp = S::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

/// Logistic `1 / (1 + exp(-x))` without overflow for large `|x|`.
pub fn logistic<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial_exact(n: usize) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        for n in 0..60usize {
            let got: f64 = ln_gamma(n as f64 + 1.0);
            assert!((got - ln_factorial_exact(n)).abs() < 1e-12 * (1.0 + got.abs()), "n={n}");
        }
        let half: f64 = ln_gamma(0.5);
        assert!((half - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_choose_small_values() {
        let c: f64 = ln_choose(7, 2);
        assert!((c.exp() - 21.0).abs() < 1e-12);
        let c: f64 = ln_choose(127, 4);
        assert!((c.exp() - 10_334_625.0).abs() < 1e-5);
        assert_eq!(ln_choose::<f64>(3, 5), f64::NEG_INFINITY);
        assert_eq!(ln_choose::<f64>(9, 0), 0.0);
    }

    #[test]
    fn ln_choose_does_not_overflow_at_large_n() {
        let c: f64 = ln_choose(4096, 2048);
        assert!(c.is_finite());
        // ln C(2m, m) ~ 2m ln 2 - ln(sqrt(pi m))
        let approx = 4096.0 * 2f64.ln() - (std::f64::consts::PI * 2048.0).sqrt().ln();
        assert!((c - approx).abs() < 1e-3);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        let v = [1000.0f64, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let v = [f64::NEG_INFINITY, 0.0];
        assert_eq!(log_sum_exp(&v), 0.0);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0f64), 0.5);
        assert!(logistic(-800.0f64) >= 0.0);
        assert_eq!(logistic(800.0f64), 1.0);
        assert!((logistic(2.0f64) - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let c: f32 = ln_choose(10, 3);
        assert!((c.exp() - 120.0).abs() < 1e-3);
    }
}
