//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use clap::Parser;
use rayon::prelude::*;
use spinmarket_cli::args::Cli;
use spinmarket_cli::dispatch;
use spinmarket_core::oracle::{max_abs_diff, null_space, product_form};
use spinmarket_core::{
    build_chain, invariant_measure, moments_general, moments_prop2, p_stay, replica_rng, residual_uncertainty,
    simulate, stationary_solve, sweep_fixed_total, sweep_k_plus, total_variation, Beta, Params, Perturbation,
    SimulationConfig, Simulator, Spin, TieRule,
};

const ORACLE_TOL: f64 = 1e-10;
const SOLVER_TOL: f64 = 1e-12;
const MC_TV_TOL: f64 = 0.02;
const MC_SEED: u64 = 42;
const REDUCTION_TOL: f64 = 1e-12;
const SIGNED_MEAN_TOL: f64 = 1e-12;
const BAND: (f64, f64) = (12.8, 115.2);
const BAND_MASS_MIN: f64 = 0.99;
const ABSORPTION_RUNS: u64 = 100;
const ABSORPTION_SEED: u64 = 2024;
const ABSORPTION_FREQ: (f64, f64) = (0.35, 0.65);
const SYMMETRY_TOL: f64 = 1e-12;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn frozen(n: usize, d: usize, alpha: f64) -> Params {
    Params::frozen(n, d, alpha).unwrap()
}

fn reference() -> Params {
    frozen(128, 2, 5.0)
}

fn grid() -> Vec<(Params, Perturbation)> {
    let mut cells = Vec::new();
    for n in [8, 16, 32, 64] {
        for d in [1, 2] {
            for alpha in [3.0, 5.0, 10.0] {
                let params = frozen(n, d, alpha);
                if alpha <= 2.0 * d as f64 {
                    continue;
                }
                for (kp, km) in [(0, 0), (5, 0), (10, 3)] {
                    if kp + km < n {
                        cells.push((params, Perturbation::new(kp, km)));
                    }
                }
            }
        }
    }
    cells
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cells = grid();
    let mut worst = 0.0f64;
    for (params, pert) in &cells {
        let closed = invariant_measure(params, *pert).unwrap();
        let chain = build_chain(params, *pert, Beta::Frozen, TieRule::Paper).unwrap();
        let oracle = stationary_solve(&chain).unwrap();
        worst = worst.max(max_abs_diff(&closed.probs, &oracle).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= ORACLE_TOL && secs < 5.0,
        format!("max diff {worst:.3e} (tol {ORACLE_TOL:e}) over {} cells, {secs:.2}s (limit 5s)", cells.len()),
    )
}

fn dual_solver_agreement() -> Outcome {
    let mut worst = 0.0f64;
    for (params, pert) in grid() {
        let chain = build_chain(&params, pert, Beta::Frozen, TieRule::Paper).unwrap();
        worst = worst.max(max_abs_diff(&product_form(&chain).unwrap(), &null_space(&chain).unwrap()).unwrap());
    }
    outcome(worst <= SOLVER_TOL, format!("max diff {worst:.3e} (tol {SOLVER_TOL:e})"))
}

fn monte_carlo_consistency() -> Outcome {
    let start = Instant::now();
    let params = reference();
    let config = SimulationConfig::new(1_000_000, 100_000, MC_SEED).with_tie_rule(TieRule::Limit);
    let stats = simulate(&params, Perturbation::NONE, &config).unwrap();
    let empirical: Vec<f64> = stats.distribution();
    let closed = invariant_measure(&params, Perturbation::NONE).unwrap().by_n_plus();
    let limit_chain = build_chain(&params, Perturbation::NONE, Beta::Frozen, TieRule::Limit).unwrap();
    let limit = stationary_solve(&limit_chain).unwrap();
    let tv = total_variation(&empirical, &closed).unwrap();
    let convention = total_variation(&limit, &closed).unwrap();
    let sampling = total_variation(&empirical, &limit).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        tv <= MC_TV_TOL && secs < 60.0,
        format!(
            "TV {tv:.4} (tol {MC_TV_TOL}); tie convention {convention:.4}, vs limit-rule chain {sampling:.4}; seed {MC_SEED}, {secs:.1}s"
        ),
    )
}

fn symmetric_reduction() -> Outcome {
    let mut reduction = 0.0f64;
    for n in [16, 64, 128] {
        for (d, alpha) in [(1, 3.0), (1, 5.0), (1, 10.0), (2, 5.0), (2, 10.0)] {
            let m = invariant_measure(&frozen(n, d, alpha), Perturbation::NONE).unwrap();
            let a = moments_prop2(&m).unwrap();
            let b = moments_general(&m);
            for (x, y) in [(a.mean_x_signed, b.mean_x_signed), (a.ex2, b.ex2), (a.mean_y, b.mean_y), (a.ey2, b.ey2)] {
                reduction = reduction.max((x - y).abs() / 1f64.max(x.abs()).max(y.abs()));
            }
        }
    }
    let mut signed = 0.0f64;
    let mut cells = grid();
    cells.extend((0..128).map(|k| (reference(), Perturbation::new(k, 0))));
    cells.extend((0..=120).map(|k| (reference(), Perturbation::new(k, 120 - k))));
    for (params, pert) in &cells {
        signed = signed.max(moments_general(&invariant_measure(params, *pert).unwrap()).mean_x_signed.abs());
    }
    outcome(
        reduction <= REDUCTION_TOL && signed <= SIGNED_MEAN_TOL,
        format!(
            "scaled moment diff {reduction:.3e} (tol {REDUCTION_TOL:e}); max |E[X]| {signed:.3e} over {} measures (tol {SIGNED_MEAN_TOL:e})",
            cells.len()
        ),
    )
}

fn band_mass() -> Outcome {
    let m = invariant_measure(&reference(), Perturbation::NONE).unwrap();
    let mass: f64 = (0..=128).filter(|&i| (i as f64) >= BAND.0 && (i as f64) <= BAND.1).map(|i| m.prob_n_plus(i)).sum();
    outcome(mass >= BAND_MASS_MIN, format!("mass on [{}, {}] = {mass:.6} (min {BAND_MASS_MIN})", BAND.0, BAND.1))
}

fn subcritical_absorption() -> Outcome {
    let params = frozen(128, 2, 2.0);
    let ends: Vec<Option<usize>> = (0..ABSORPTION_RUNS)
        .into_par_iter()
        .map(|r| {
            let rng = replica_rng(ABSORPTION_SEED, r);
            let mut sim = Simulator::new(params, Perturbation::NONE, TieRule::Paper, None, rng).unwrap();
            sim.run_until_absorbed(50_000_000).map(|_| sim.state().n_plus())
        })
        .collect();
    let zero = ends.iter().filter(|e| **e == Some(0)).count() as f64 / ABSORPTION_RUNS as f64;
    let full = ends.iter().filter(|e| **e == Some(128)).count() as f64 / ABSORPTION_RUNS as f64;
    let within = |f: f64| f >= ABSORPTION_FREQ.0 && f <= ABSORPTION_FREQ.1;
    outcome(
        zero + full == 1.0 && within(zero) && within(full),
        format!("N+=0 in {zero:.2}, N+=128 in {full:.2} of {ABSORPTION_RUNS} runs (each within {ABSORPTION_FREQ:?})"),
    )
}

fn pinned_mean_shift() -> Outcome {
    let mean = |kp, km| invariant_measure(&reference(), Perturbation::new(kp, km)).unwrap().mean_n_plus();
    let mut smallest = f64::INFINITY;
    for (kp, km) in [(1, 0), (5, 0), (10, 0), (10, 3), (20, 5), (40, 20), (64, 0)] {
        smallest = smallest.min(mean(kp, km) - mean(km, km));
    }
    outcome(smallest > 0.0, format!("smallest shift of mean N+ over k+ = k- baseline: {smallest:.6}"))
}

fn uncertainty_floor() -> Outcome {
    let start = Instant::now();
    let params = reference();
    let a = sweep_k_plus(&params, 0, 0..=127).unwrap();
    let b = sweep_fixed_total(&params, 120, 0..=120).unwrap();
    let live: Vec<f64> =
        a.records.iter().chain(&b.records).filter(|r| 128 - r.k_plus - r.k_minus >= 2).map(|r| r.uncertainty).collect();
    let min = live.iter().copied().fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        min > 0.0 && secs < 10.0,
        format!("min uncertainty {min:.6e} over {} cells with >= 2 free sites, {secs:.2}s (limit 10s)", live.len()),
    )
}

fn interior_minimum() -> Outcome {
    let sweep = sweep_k_plus(&reference(), 0, 0..=127).unwrap();
    let u = sweep.uncertainties();
    let (argmin, min) =
        u.iter().enumerate().fold((0, f64::INFINITY), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
    let locals: Vec<usize> = (1..127).filter(|&k| u[k] <= u[k - 1] && u[k] <= u[k + 1]).collect();
    outcome(
        argmin > 0 && argmin < 127,
        format!("global min {min:.6} at k+ = {argmin} (interior required); interior local minima at k+ {locals:?}"),
    )
}

fn symmetry() -> Outcome {
    let params = reference();
    let mut worst = 0.0f64;
    for k in [0, 5, 20, 60] {
        let m = invariant_measure(&params, Perturbation::new(k, k)).unwrap();
        let last = m.probs.len() - 1;
        for ell in 0..=last {
            worst = worst.max((m.probs[ell] - m.probs[last - ell]).abs());
        }
    }
    for (kp, km) in [(0, 1), (3, 0), (10, 3), (20, 5), (60, 40), (100, 0)] {
        let u = residual_uncertainty(&params, Perturbation::new(kp, km)).unwrap();
        let v = residual_uncertainty(&params, Perturbation::new(km, kp)).unwrap();
        worst = worst.max((u - v).abs());
    }
    for i in 1..128 {
        let minus: f64 = p_stay(i, Spin::Minus, &params).unwrap();
        let plus: f64 = p_stay(128 - i, Spin::Plus, &params).unwrap();
        worst = worst.max((minus - plus).abs());
    }
    outcome(worst <= SYMMETRY_TOL, format!("max mirror difference {worst:.3e} (tol {SYMMETRY_TOL:e})"))
}

fn run_cli(out: &Path, args: &[&str]) {
    let mut full = vec!["spinmarket"];
    full.extend_from_slice(args);
    full.extend(["--out", out.to_str().unwrap()]);
    let cli = Cli::try_parse_from(full).unwrap();
    dispatch(cli.command).unwrap_or_else(|e| panic!("{args:?}: {e}"));
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let sim = ["simulate", "--n", "128", "--epochs", "200000", "--burn-in", "10000", "--seed", "9", "--replicas", "4"];
    let sweep = ["sweep", "--mode", "k-plus"];
    let mut identical = true;
    for (args, file) in [(&sim[..], "simulate_histogram.csv"), (&sweep[..], "sweep_surface.csv")] {
        let mut outputs = Vec::new();
        for (run, threads) in [(0, "1"), (1, "1"), (2, "4")] {
            let out = dir.path().join(format!("{}-{run}", args[0]));
            let mut full = args.to_vec();
            full.extend(["--threads", threads]);
            run_cli(&out, &full);
            outputs.push(std::fs::read(out.join(file)).unwrap());
        }
        identical &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    outcome(
        identical,
        format!("simulate histogram and sweep surface byte-identical across reruns and 1/4 threads: {identical}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle equivalence", oracle_equivalence),
        ("dual-solver agreement", dual_solver_agreement),
        ("monte carlo consistency", monte_carlo_consistency),
        ("symmetric moment reduction", symmetric_reduction),
        ("band mass", band_mass),
        ("subcritical absorption", subcritical_absorption),
        ("pinned mean shift", pinned_mean_shift),
        ("uncertainty floor", uncertainty_floor),
        ("interior minimum", interior_minimum),
        ("symmetry battery", symmetry),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (name, criterion) in criteria {
        let start = Instant::now();
        let result = criterion();
        let verdict = if result.passed { "PASS" } else { "FAIL" };
        println!("{verdict}  {name:<28} {} [{:.2}s]", result.detail, start.elapsed().as_secs_f64());
        if !result.passed {
            failed.push(name);
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed.len(), criteria.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
