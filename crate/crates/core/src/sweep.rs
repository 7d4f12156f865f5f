//! Residual-uncertainty surface over pinned-spin perturbations.
//!
//! Sites are exchangeable under uniform random neighborhoods, so only the
//! counts `(k₊, k₋)` matter and sweeps run over counts. Cells are independent
//! and evaluated in parallel; results are assembled in sweep order.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frozen::{invariant_measure, moments_general};
use crate::moments::MomentSummary;
use crate::params::{ModelParams, Perturbation};
use crate::scalar::Scalar;

/// Minima closer than this are reported together.
pub const ARGMIN_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord<S> {
    pub k_plus: usize,
    pub k_minus: usize,
    pub moments: MomentSummary<S>,
    pub uncertainty: S,
    /// Fewer than two free sites remain.
    pub degenerate: bool,
}

impl<S: Scalar> SweepRecord<S> {
    pub fn pert(&self) -> Perturbation {
        Perturbation::new(self.k_plus, self.k_minus)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<S> {
    pub records: Vec<SweepRecord<S>>,
    pub min_value: S,
    pub argmin: Vec<(usize, usize)>,
}

impl<S: Scalar> SweepResult<S> {
    fn from_records(records: Vec<SweepRecord<S>>) -> Result<Self> {
        let (min_value, argmin) = find_minima(&records)?;
        Ok(SweepResult { records, min_value, argmin })
    }

    pub fn uncertainties(&self) -> Vec<S> {
        self.records.iter().map(|r| r.uncertainty).collect()
    }

    /// Smallest uncertainty over cells with at least two free sites.
    pub fn min_nondegenerate(&self) -> Option<S> {
        self.records.iter().filter(|r| !r.degenerate).map(|r| r.uncertainty).reduce(S::min)
    }

    /// Indices of strict-or-plateau local minima along the sweep, endpoints excluded.
    pub fn interior_local_minima(&self) -> Vec<usize> {
        let u = self.uncertainties();
        (1..u.len().saturating_sub(1)).filter(|&k| u[k] <= u[k - 1] && u[k] <= u[k + 1]).collect()
    }
}

fn record_for<S: Scalar>(params: &ModelParams<S>, pert: Perturbation) -> Result<SweepRecord<S>> {
    let moments = moments_general(&invariant_measure(params, pert)?);
    Ok(SweepRecord {
        k_plus: pert.k_plus,
        k_minus: pert.k_minus,
        moments,
        uncertainty: moments.uncertainty,
        degenerate: pert.free_sites(params.n_sites) < 2,
    })
}

fn run_cells<S: Scalar>(params: &ModelParams<S>, cells: Vec<Perturbation>) -> Result<SweepResult<S>> {
    params.validate()?;
    if cells.is_empty() {
        return Err(Error::Config("empty sweep range".into()));
    }
    for cell in &cells {
        cell.validate(params.n_sites)?;
    }
    let records = cells.into_par_iter().map(|pert| record_for(params, pert)).collect::<Result<Vec<_>>>()?;
    SweepResult::from_records(records)
}

/// One cell per `k₊` in `k_plus_range` with `k₋` fixed.
pub fn sweep_k_plus<S: Scalar>(
    params: &ModelParams<S>,
    k_minus: usize,
    k_plus_range: RangeInclusive<usize>,
) -> Result<SweepResult<S>> {
    let cells = k_plus_range.map(|k_plus| Perturbation::new(k_plus, k_minus)).collect();
    run_cells(params, cells)
}

/// One cell per split `k₊ + k₋ = total`, `k₊` in `k_plus_range`.
pub fn sweep_fixed_total<S: Scalar>(
    params: &ModelParams<S>,
    total: usize,
    k_plus_range: RangeInclusive<usize>,
) -> Result<SweepResult<S>> {
    if total >= params.n_sites {
        return Err(Error::Config(format!("total {total} must be below N = {}", params.n_sites)));
    }
    if *k_plus_range.end() > total {
        return Err(Error::Config(format!("k_plus range ends at {} beyond total {total}", k_plus_range.end())));
    }
    let cells = k_plus_range.map(|k_plus| Perturbation::new(k_plus, total - k_plus)).collect();
    run_cells(params, cells)
}

/// Exhaustive scan; every cell within [`ARGMIN_TIE_TOLERANCE`] of the minimum is reported.
pub fn find_minima<S: Scalar>(records: &[SweepRecord<S>]) -> Result<(S, Vec<(usize, usize)>)> {
    let min_value = records
        .iter()
        .map(|r| r.uncertainty)
        .reduce(S::min)
        .ok_or_else(|| Error::Domain("no sweep records to minimize".into()))?;
    let tol = S::of(ARGMIN_TIE_TOLERANCE);
    let argmin = records.iter().filter(|r| r.uncertainty - min_value <= tol).map(|r| (r.k_plus, r.k_minus)).collect();
    Ok((min_value, argmin))
}
