//! Cross-validation battery: closed form against the chain oracle and Monte Carlo,
//! plus the reduction, symmetry, sweep and determinism checks. Every check
//! reports what it observed and what it required.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use spinmarket_core::oracle::{max_abs_diff, null_space, product_form};
use spinmarket_core::{
    band, build_chain, invariant_measure, moments_general, moments_prop2, p_stay, replica_rng, residual_uncertainty,
    simulate, stationary_solve, sweep_fixed_total, sweep_k_plus, total_variation, Beta, Measure, Params, Perturbation,
    SimulationConfig, Simulator, Spin, TieRule,
};

use crate::commands::{render_simulate, render_sweep};
use crate::config::{RunConfig, SweepMode};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
    pub seconds: f64,
}

impl Check {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "{verdict}  {:<28} observed {} | expected {} [{:.2}s]",
            self.name, self.observed, self.expected, self.seconds
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    /// Closed-form checks only.
    pub quick: bool,
    /// Perturbs one probability before the normalization check.
    pub inject_fault: bool,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { quick: false, inject_fault: false, seed: 42 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_names(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        let failed = self.failed_names().len();
        let _ = writeln!(s, "{} checks, {} passed, {} failed", self.checks.len(), self.checks.len() - failed, failed);
        s
    }
}

pub fn run_battery(opts: &VerifyOptions) -> Report {
    let mut checks = vec![
        normalization(opts.inject_fault),
        oracle_equivalence(),
        dual_solver_agreement(),
        symmetric_moment_reduction(),
        signed_mean_zero(),
        band_mass(),
        pinned_mean_shift(),
        uncertainty_positive(),
        interior_argmin(),
        symmetry(),
    ];
    if !opts.quick {
        checks.push(monte_carlo_tv(opts.seed));
        checks.push(subcritical_absorption(opts.seed));
        checks.push(determinism(opts.seed));
    }
    Report { checks }
}

fn timed(name: &'static str, expected: String, f: impl FnOnce() -> Result<(bool, String), String>) -> Check {
    let start = Instant::now();
    let (passed, observed) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Check { name, passed, observed, expected, seconds: start.elapsed().as_secs_f64() }
}

fn frozen(n: usize, d: usize, alpha: f64) -> Params {
    Params::frozen(n, d, alpha).expect("fixed parameters are valid")
}

/// Supercritical `N ∈ {8, 16, 32, 64}`, `d ∈ {1, 2}`, `α ∈ {3, 5, 10}` with the
/// admissible perturbations among `(0,0)`, `(5,0)`, `(10,3)`.
pub fn oracle_grid() -> Vec<(Params, Perturbation)> {
    let mut grid = Vec::new();
    for n in [8, 16, 32, 64] {
        for d in [1, 2] {
            for alpha in [3.0, 5.0, 10.0] {
                let params = frozen(n, d, alpha);
                if !params.is_supercritical() {
                    continue;
                }
                for (kp, km) in [(0, 0), (5, 0), (10, 3)] {
                    let pert = Perturbation::new(kp, km);
                    if pert.validate(n).is_ok() {
                        grid.push((params, pert));
                    }
                }
            }
        }
    }
    grid
}

/// The lattice size, neighborhood and coupling behind the band, shift and sweep checks.
pub fn reference_params() -> Params {
    frozen(128, 2, 5.0)
}

fn measure(params: &Params, pert: Perturbation) -> Result<Measure, String> {
    invariant_measure(params, pert).map_err(|e| e.to_string())
}

pub fn normalization(inject_fault: bool) -> Check {
    timed("normalization", "|sum pi - 1| <= 1e-12".into(), || {
        let mut cases = oracle_grid();
        let reference = reference_params();
        cases.extend([(0, 0), (20, 5), (60, 0)].map(|(kp, km)| (reference, Perturbation::new(kp, km))));
        let mut worst = 0.0f64;
        for (i, (params, pert)) in cases.iter().enumerate() {
            let mut m = measure(params, *pert)?;
            if inject_fault && i == 0 {
                let mid = m.probs.len() / 2;
                m.probs[mid] += 1e-6;
            }
            worst = worst.max((m.total_mass() - 1.0).abs());
        }
        Ok((worst <= 1e-12, format!("max |sum pi - 1| = {worst:.3e} over {} measures", cases.len())))
    })
}

pub fn oracle_equivalence() -> Check {
    timed("oracle-equivalence", "max |pi - oracle| <= 1e-10, < 5 s".into(), || {
        let start = Instant::now();
        let mut worst = 0.0f64;
        let grid = oracle_grid();
        for (params, pert) in &grid {
            let closed = measure(params, *pert)?;
            let chain = build_chain(params, *pert, Beta::Frozen, TieRule::Paper).map_err(|e| e.to_string())?;
            let oracle = stationary_solve(&chain).map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_diff(&closed.probs, &oracle).map_err(|e| e.to_string())?);
        }
        let secs = start.elapsed().as_secs_f64();
        Ok((worst <= 1e-10 && secs < 5.0, format!("{worst:.3e} over {} cells in {secs:.2}s", grid.len())))
    })
}

pub fn dual_solver_agreement() -> Check {
    timed("dual-solver-agreement", "max |product form - null space| <= 1e-12".into(), || {
        let mut worst = 0.0f64;
        for (params, pert) in oracle_grid() {
            let chain = build_chain(&params, pert, Beta::Frozen, TieRule::Paper).map_err(|e| e.to_string())?;
            let a = product_form(&chain).map_err(|e| e.to_string())?;
            let b = null_space(&chain).map_err(|e| e.to_string())?;
            worst = worst.max(max_abs_diff(&a, &b).map_err(|e| e.to_string())?);
        }
        Ok((worst <= 1e-12, format!("{worst:.3e}")))
    })
}

/// Each of the four raw moments agrees to `1e-12 · max(1, |a|, |b|)`.
pub fn symmetric_moment_reduction() -> Check {
    timed("symmetric-moment-reduction", "scaled moment difference <= 1e-12".into(), || {
        let mut worst = 0.0f64;
        let mut count = 0;
        for n in [16, 64, 128] {
            for d in [1, 2] {
                for alpha in [3.0, 5.0, 10.0] {
                    let params = frozen(n, d, alpha);
                    if !params.is_supercritical() {
                        continue;
                    }
                    let m = measure(&params, Perturbation::NONE)?;
                    let literal = moments_prop2(&m).map_err(|e| e.to_string())?;
                    worst = worst.max(literal.max_scaled_diff(&moments_general(&m)));
                    count += 1;
                }
            }
        }
        Ok((worst <= 1e-12, format!("{worst:.3e} over {count} measures")))
    })
}

pub fn signed_mean_zero() -> Check {
    timed("signed-mean-zero", "|E[X]| <= 1e-12".into(), || {
        let mut worst = 0.0f64;
        let mut cases = oracle_grid();
        let reference = reference_params();
        cases.extend((0..128).map(|kp| (reference, Perturbation::new(kp, 0))));
        cases.extend((0..=120).map(|kp| (reference, Perturbation::new(kp, 120 - kp))));
        for (params, pert) in &cases {
            worst = worst.max(moments_general(&measure(params, *pert)?).mean_x_signed.abs());
        }
        Ok((worst <= 1e-12, format!("{worst:.3e} over {} measures", cases.len())))
    })
}

pub fn band_mass() -> Check {
    timed("band-mass", "mass on [12.8, 115.2] >= 0.99".into(), || {
        let params = reference_params();
        let (lo, hi) = band(&params);
        let mass = measure(&params, Perturbation::NONE)?.mass_between(lo, hi);
        let endpoints_ok = (lo - 12.8).abs() < 1e-12 && (hi - 115.2).abs() < 1e-12;
        Ok((mass >= 0.99 && endpoints_ok, format!("{mass:.6} on [{lo}, {hi}]")))
    })
}

pub fn pinned_mean_shift() -> Check {
    timed("pinned-mean-shift", "mean N+ (k+, k-) > mean N+ (k-, k-) whenever k+ > k-".into(), || {
        let params = reference_params();
        let mut smallest = f64::INFINITY;
        for (kp, km) in [(1, 0), (5, 0), (10, 0), (10, 3), (20, 5), (40, 20), (64, 0)] {
            let shifted = measure(&params, Perturbation::new(kp, km))?.mean_n_plus();
            let balanced = measure(&params, Perturbation::new(km, km))?.mean_n_plus();
            smallest = smallest.min(shifted - balanced);
        }
        Ok((smallest > 0.0, format!("smallest upward shift {smallest:.6}")))
    })
}

pub fn uncertainty_positive() -> Check {
    timed("uncertainty-positive", "sigma_X sigma_Y > 0 on cells with >= 2 free sites, < 10 s".into(), || {
        let start = Instant::now();
        let params = reference_params();
        let a = sweep_k_plus(&params, 0, 0..=127).map_err(|e| e.to_string())?;
        let b = sweep_fixed_total(&params, 120, 0..=120).map_err(|e| e.to_string())?;
        let min = a.min_nondegenerate().into_iter().chain(b.min_nondegenerate()).fold(f64::INFINITY, f64::min);
        let secs = start.elapsed().as_secs_f64();
        let cells = a.records.iter().chain(&b.records).filter(|r| !r.degenerate).count();
        Ok((min > 0.0 && secs < 10.0, format!("min {min:.6e} over {cells} cells in {secs:.2}s")))
    })
}

pub fn interior_argmin() -> Check {
    timed("interior-argmin", "argmin of the k+ sweep strictly inside 0..127".into(), || {
        let sweep = sweep_k_plus(&reference_params(), 0, 0..=127).map_err(|e| e.to_string())?;
        let interior = sweep.argmin.iter().all(|&(kp, _)| kp > 0 && kp < 127);
        let locals: Vec<String> = sweep
            .interior_local_minima()
            .into_iter()
            .map(|i| format!("{}:{:.4}", sweep.records[i].k_plus, sweep.records[i].uncertainty))
            .collect();
        let argmin: Vec<usize> = sweep.argmin.iter().map(|&(kp, _)| kp).collect();
        Ok((
            interior,
            format!(
                "argmin k+ {argmin:?} at {:.6}; interior local minima (k+:value) [{}]",
                sweep.min_value,
                locals.join(", ")
            ),
        ))
    })
}

pub fn symmetry() -> Check {
    timed("symmetry", "all mirror differences <= 1e-12".into(), || {
        let mut worst = 0.0f64;
        let reference = reference_params();
        let mut mirrored_cases: Vec<(Params, usize)> = [0, 5, 20, 60].map(|k| (reference, k)).to_vec();
        mirrored_cases.extend(oracle_grid().into_iter().map(|(p, _)| (p, 0)));
        for (params, k) in &mirrored_cases {
            let m = measure(params, Perturbation::new(*k, *k))?;
            let last = m.free_sites();
            for ell in 0..=last {
                worst = worst.max((m.probs[ell] - m.probs[last - ell]).abs());
            }
        }
        for (kp, km) in [(0, 1), (3, 0), (10, 3), (20, 5), (60, 40), (100, 0)] {
            let u = residual_uncertainty(&reference, Perturbation::new(kp, km)).map_err(|e| e.to_string())?;
            let v = residual_uncertainty(&reference, Perturbation::new(km, kp)).map_err(|e| e.to_string())?;
            worst = worst.max((u - v).abs());
        }
        for params in [reference, frozen(64, 1, 3.0), frozen(33, 2, 10.0)] {
            let n = params.n_sites;
            for i in 1..n {
                let minus: f64 = p_stay(i, Spin::Minus, &params).map_err(|e| e.to_string())?;
                let plus: f64 = p_stay(n - i, Spin::Plus, &params).map_err(|e| e.to_string())?;
                worst = worst.max((minus - plus).abs());
            }
        }
        Ok((worst <= 1e-12, format!("{worst:.3e}")))
    })
}

/// Limit-rule dynamics against the closed form. The residual between the
/// limit-rule chain and the closed form is the part owed to the tie convention.
pub fn monte_carlo_tv(seed: u64) -> Check {
    timed("monte-carlo-tv", "TV(empirical, closed form) <= 0.02, < 60 s".into(), || {
        let start = Instant::now();
        let params = reference_params();
        let config = SimulationConfig::new(1_000_000, 100_000, seed).with_tie_rule(TieRule::Limit);
        let stats = simulate(&params, Perturbation::NONE, &config).map_err(|e| e.to_string())?;
        let empirical: Vec<f64> = stats.distribution();
        let closed = measure(&params, Perturbation::NONE)?.by_n_plus();
        let chain =
            build_chain(&params, Perturbation::NONE, Beta::Frozen, TieRule::Limit).map_err(|e| e.to_string())?;
        let limit = stationary_solve(&chain).map_err(|e| e.to_string())?;
        let tv = |p: &[f64], q: &[f64]| total_variation(p, q).map_err(|e| e.to_string());
        let against_closed = tv(&empirical, &closed)?;
        let against_limit = tv(&empirical, &limit)?;
        let convention = tv(&limit, &closed)?;
        let secs = start.elapsed().as_secs_f64();
        Ok((
            against_closed <= 0.02 && secs < 60.0,
            format!(
                "{against_closed:.4} (vs limit-rule chain {against_limit:.4}; tie convention accounts for {convention:.4}) in {secs:.1}s"
            ),
        ))
    })
}

/// Final `N⁺` of each absorbed subcritical run, or `None` if it never absorbed.
pub fn absorption_runs(params: Params, runs: u64, seed: u64, max_epochs: u64) -> Vec<Option<usize>> {
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut sim = Simulator::new(params, Perturbation::NONE, TieRule::Paper, None, replica_rng(seed, r))
                .expect("valid subcritical parameters");
            sim.run_until_absorbed(max_epochs).map(|_| sim.state().n_plus())
        })
        .collect()
}

pub fn subcritical_absorption(seed: u64) -> Check {
    timed("subcritical-absorption", "100 runs all absorb; each consensus frequency in [0.35, 0.65]".into(), || {
        let params = frozen(128, 2, 2.0);
        let ends = absorption_runs(params, 100, seed, 50_000_000);
        let absorbed = ends.iter().flatten().count();
        let at_zero = ends.iter().filter(|e| **e == Some(0)).count();
        let at_full = ends.iter().filter(|e| **e == Some(128)).count();
        let ok = |c: usize| (0.35..=0.65).contains(&(c as f64 / 100.0));
        Ok((
            absorbed == 100 && at_zero + at_full == 100 && ok(at_zero) && ok(at_full),
            format!("{absorbed} absorbed: {at_zero} at N+=0, {at_full} at N+=128"),
        ))
    })
}

pub fn determinism(seed: u64) -> Check {
    timed("determinism", "identical CSV across reruns and thread counts".into(), || {
        let sim_cfg = |threads| RunConfig {
            n: 64,
            epochs: 50_000,
            burn_in: 5_000,
            replicas: 4,
            seed,
            threads: Some(threads),
            ..Default::default()
        };
        let sweep_cfg = |threads| RunConfig { mode: SweepMode::KPlus, threads: Some(threads), ..Default::default() };
        let csv = |r: crate::error::CliResult<crate::commands::Rendered>, name: &str| -> Result<String, String> {
            let r = r.map_err(|e| e.to_string())?;
            r.files.get(name).map(str::to_owned).ok_or_else(|| format!("{name} missing"))
        };
        let sims = [sim_cfg(1), sim_cfg(1), sim_cfg(4)]
            .iter()
            .map(|c| csv(render_simulate(c), "simulate_histogram.csv"))
            .collect::<Result<Vec<_>, _>>()?;
        let sweeps = [sweep_cfg(1), sweep_cfg(4)]
            .iter()
            .map(|c| csv(render_sweep(c), "sweep_surface.csv"))
            .collect::<Result<Vec<_>, _>>()?;
        let same_sim = sims.windows(2).all(|w| w[0] == w[1]);
        let same_sweep = sweeps[0] == sweeps[1];
        Ok((same_sim && same_sweep, format!("histogram identical: {same_sim}; surface identical: {same_sweep}")))
    })
}
