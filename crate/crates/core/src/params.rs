//! Model parameters, perturbations and tie conventions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inverse temperature. `Frozen` is the β → ∞ limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta<S> {
    Finite(S),
    Frozen,
}

impl<S: Scalar> Beta<S> {
    pub fn is_frozen(&self) -> bool {
        matches!(self, Beta::Frozen)
    }
}

/// How a zero local field is resolved in the frozen phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// The current spin is kept (the boundary term counts as stable).
    #[default]
    Paper,
    /// The pointwise limit of the logistic: +1 with probability 1/2.
    Limit,
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TieRule::Paper => f.write_str("paper"),
            TieRule::Limit => f.write_str("limit"),
        }
    }
}

impl std::str::FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(TieRule::Paper),
            "limit" => Ok(TieRule::Limit),
            other => Err(Error::Config(format!("unknown tie rule `{other}` (expected paper|limit)"))),
        }
    }
}

/// Orientation of a single spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub fn value(self) -> i8 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Subcritical,
    Supercritical,
}

/// Parameters of the lattice process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<S> {
    pub n_sites: usize,
    pub dim: usize,
    pub alpha: S,
    pub beta: Beta<S>,
    pub lambda: S,
    pub p_star: S,
}

impl<S: Scalar> ModelParams<S> {
    /// Frozen-phase parameters with λ = 1 and p* = 1.
    pub fn frozen(n_sites: usize, dim: usize, alpha: S) -> Result<Self> {
        Self::new(n_sites, dim, alpha, Beta::Frozen, S::one(), S::one())
    }

    pub fn new(n_sites: usize, dim: usize, alpha: S, beta: Beta<S>, lambda: S, p_star: S) -> Result<Self> {
        let params = ModelParams { n_sites, dim, alpha, beta, lambda, p_star };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::Config(format!("n_sites must be at least 2, got {}", self.n_sites)));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if 2 * self.dim > self.n_sites - 1 {
            return Err(Error::Config(format!(
                "neighborhood of {} sites does not fit among the {} other sites",
                2 * self.dim,
                self.n_sites - 1
            )));
        }
        if !self.alpha.is_finite() || self.alpha < S::zero() {
            return Err(Error::Config(format!("alpha must be finite and nonnegative, got {}", self.alpha)));
        }
        if let Beta::Finite(b) = self.beta {
            if !b.is_finite() || b <= S::zero() {
                return Err(Error::Config(format!("beta must be finite and positive, got {b}")));
            }
        }
        if !self.lambda.is_finite() || self.lambda < S::zero() {
            return Err(Error::Config(format!("lambda must be finite and nonnegative, got {}", self.lambda)));
        }
        if !self.p_star.is_finite() || self.p_star <= S::zero() {
            return Err(Error::Config(format!("p_star must be finite and positive, got {}", self.p_star)));
        }
        Ok(())
    }

    /// Size of every sampled neighborhood, `2d`.
    pub fn neighborhood_size(&self) -> usize {
        2 * self.dim
    }

    pub fn regime(&self) -> Regime {
        if self.alpha > S::of_usize(2 * self.dim) {
            Regime::Supercritical
        } else {
            Regime::Subcritical
        }
    }

    pub fn is_supercritical(&self) -> bool {
        self.regime() == Regime::Supercritical
    }

    pub fn with_beta(mut self, beta: Beta<S>) -> Self {
        self.beta = beta;
        self
    }
}

/// Numbers of sites pinned to +1 and to -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Perturbation {
    pub k_plus: usize,
    pub k_minus: usize,
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation { k_plus: 0, k_minus: 0 };

    pub fn new(k_plus: usize, k_minus: usize) -> Self {
        Perturbation { k_plus, k_minus }
    }

    pub fn pinned(&self) -> usize {
        self.k_plus + self.k_minus
    }

    pub fn is_none(&self) -> bool {
        self.pinned() == 0
    }

    /// Number of free sites left on a lattice of `n_sites`.
    pub fn free_sites(&self, n_sites: usize) -> usize {
        n_sites - self.pinned()
    }

    pub fn validate(&self, n_sites: usize) -> Result<()> {
        if self.pinned() >= n_sites {
            return Err(Error::Config(format!(
                "k_plus + k_minus = {} must be below n_sites = {n_sites}",
                self.pinned()
            )));
        }
        Ok(())
    }

    /// The perturbation seen after a global spin flip.
    pub fn mirrored(&self) -> Self {
        Perturbation { k_plus: self.k_minus, k_minus: self.k_plus }
    }
}
