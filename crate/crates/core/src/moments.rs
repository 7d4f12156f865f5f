use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Stationary moments of the flip indicator `X` and the imbalance `Y = |2N⁺ − N|`.
///
/// `mean_x_signed` is the mean signed increment of `N⁺`; `ex2` is `E[X²]`, the
/// per-epoch flip probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary<S> {
    pub mean_x_signed: S,
    pub ex2: S,
    pub mean_y: S,
    pub ey2: S,
    pub sigma_x: S,
    pub sigma_y: S,
    /// `σ_X · σ_Y`.
    pub uncertainty: S,
}

impl<S: Scalar> MomentSummary<S> {
    pub fn from_raw(mean_x_signed: S, ex2: S, mean_y: S, ey2: S) -> Self {
        let sigma_x = clamped_sqrt(ex2 - mean_x_signed * mean_x_signed);
        let sigma_y = clamped_sqrt(ey2 - mean_y * mean_y);
        MomentSummary { mean_x_signed, ex2, mean_y, ey2, sigma_x, sigma_y, uncertainty: sigma_x * sigma_y }
    }

    pub fn var_x(&self) -> S {
        self.sigma_x * self.sigma_x
    }

    pub fn var_y(&self) -> S {
        self.sigma_y * self.sigma_y
    }

    /// `(σ_X σ_Y)²`.
    pub fn uncertainty_squared(&self) -> S {
        self.uncertainty * self.uncertainty
    }

    /// Largest absolute difference over the four raw moments.
    pub fn max_raw_diff(&self, other: &Self) -> S {
        [
            (self.mean_x_signed - other.mean_x_signed).abs(),
            (self.ex2 - other.ex2).abs(),
            (self.mean_y - other.mean_y).abs(),
            (self.ey2 - other.ey2).abs(),
        ]
        .into_iter()
        .fold(S::zero(), S::max)
    }

    /// Largest difference over the four raw moments, each scaled by `max(1, |a|, |b|)`.
    pub fn max_scaled_diff(&self, other: &Self) -> S {
        let scaled = |a: S, b: S| (a - b).abs() / S::one().max(a.abs()).max(b.abs());
        [
            scaled(self.mean_x_signed, other.mean_x_signed),
            scaled(self.ex2, other.ex2),
            scaled(self.mean_y, other.mean_y),
            scaled(self.ey2, other.ey2),
        ]
        .into_iter()
        .fold(S::zero(), S::max)
    }
}

// Rounding can push a zero variance slightly negative.
fn clamped_sqrt<S: Scalar>(v: S) -> S {
    v.max(S::zero()).sqrt()
}
