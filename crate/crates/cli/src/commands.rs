//! The five subcommands. Each `render_*` computes its files in memory;
//! [`execute`] attaches the manifest and writes everything.

use chrono::Utc;
use rayon::prelude::*;
use serde::Serialize;
use spinmarket_core::lattice::is_absorbing_consensus;
use spinmarket_core::oracle::{detailed_balance_residual, max_abs_diff};
use spinmarket_core::{
    build_chain, invariant_measure, moments_general, moments_prop2, price, replica_rng, stationary_moments,
    stationary_solve, sweep_fixed_total, sweep_k_plus, volume, Beta, Moments, Params, Perturbation, Simulator, Sweep,
    TieRule, TrajectoryStats,
};

use crate::config::{Format, RunConfig, SweepMode};
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::output::{to_json_string, Cell, OutputSet, Table};
use crate::verify::{self, VerifyOptions};

/// Files produced by a command, plus text for standard output.
#[derive(Debug, Default)]
pub struct Rendered {
    pub files: OutputSet,
    pub method: Option<String>,
    pub stdout: String,
    /// Set when the command computed its outputs but a check failed.
    pub failure: Option<String>,
    /// Write the files even when `failure` is set.
    pub keep_on_failure: bool,
}

fn table_file(files: &mut OutputSet, stem: &str, table: &Table, format: Format) {
    match format {
        Format::Csv => files.add(format!("{stem}.csv"), table.to_csv()),
        Format::Json => files.add(format!("{stem}.json"), table.to_json()),
    }
}

#[derive(Debug, Serialize)]
struct ReplicaEnd {
    replica: u64,
    final_n_plus: usize,
    absorbed: bool,
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    replicas: u64,
    epochs_per_replica: u64,
    burn_in: u64,
    epochs_recorded: u64,
    flip_rate: f64,
    moments: Moments,
    uncertainty_squared: f64,
    mean_price: f64,
    std_price: f64,
    mean_volume: f64,
    std_volume: f64,
    final_states: Vec<ReplicaEnd>,
}

/// Runs the configured replicas in parallel; results are merged in replica order.
pub fn run_replicas(
    cfg: &RunConfig,
    params: Params,
    pert: Perturbation,
) -> CliResult<Vec<(TrajectoryStats, ReplicaEndState)>> {
    (0..cfg.replicas)
        .into_par_iter()
        .map(|replica| {
            let rng = replica_rng(cfg.seed, replica);
            let mut sim = Simulator::new(params, pert, cfg.tie_rule, None, rng)?;
            sim.advance(cfg.burn_in);
            let stats = sim.record(cfg.epochs);
            let end = ReplicaEndState {
                n_plus: sim.state().n_plus(),
                absorbed: is_absorbing_consensus(sim.state(), &params, cfg.tie_rule),
            };
            Ok((stats, end))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicaEndState {
    pub n_plus: usize,
    pub absorbed: bool,
}

pub fn render_simulate(cfg: &RunConfig) -> CliResult<Rendered> {
    let params = cfg.params()?;
    let pert = cfg.perturbation()?;
    if cfg.epochs == 0 {
        return Err(CliError::Validation("epochs must be positive".into()));
    }
    if cfg.replicas == 0 {
        return Err(CliError::Validation("replicas must be positive".into()));
    }
    let runs = cfg.install(|| run_replicas(cfg, params, pert))??;

    let mut total = TrajectoryStats::new(params.n_sites);
    for (stats, _) in &runs {
        total.merge(stats);
    }
    let dist: Vec<f64> = total.distribution();
    let mut table = Table::new(vec!["n_plus", "count", "frequency"]);
    for (n_plus, (&count, &freq)) in total.histogram.iter().zip(&dist).enumerate() {
        table.push(vec![Cell::Int(n_plus as u64), Cell::Int(count), Cell::Float(freq)]);
    }

    let weighted = |f: &dyn Fn(usize) -> f64| -> (f64, f64) {
        let mean: f64 = dist.iter().enumerate().map(|(i, &p)| p * f(i)).sum();
        let second: f64 = dist.iter().enumerate().map(|(i, &p)| p * f(i) * f(i)).sum();
        (mean, (second - mean * mean).max(0.0).sqrt())
    };
    let (mean_price, std_price) = weighted(&|i| price(i, &params));
    let (mean_volume, std_volume) = weighted(&|i| volume(i, params.n_sites) as f64);
    let moments: Moments = total.empirical_moments();
    let summary = SimulationSummary {
        replicas: cfg.replicas,
        epochs_per_replica: cfg.epochs,
        burn_in: cfg.burn_in,
        epochs_recorded: total.epochs_recorded,
        flip_rate: total.flip_rate(),
        moments,
        uncertainty_squared: moments.uncertainty_squared(),
        mean_price,
        std_price,
        mean_volume,
        std_volume,
        final_states: runs
            .iter()
            .enumerate()
            .map(|(r, (_, end))| ReplicaEnd { replica: r as u64, final_n_plus: end.n_plus, absorbed: end.absorbed })
            .collect(),
    };

    let mut files = OutputSet::default();
    table_file(&mut files, "simulate_histogram", &table, cfg.format);
    files.add("simulate_summary.json", to_json_string(&summary));
    Ok(Rendered { files, method: Some("monte-carlo".into()), ..Default::default() })
}

/// The stationary law over `ℓ = 0..=M` with its log-weights, and how it was obtained.
struct Stationary {
    log_g: Vec<f64>,
    pi: Vec<f64>,
    moments: Moments,
    symmetric: Option<Moments>,
    method: &'static str,
}

fn uses_closed_form(params: &Params, tie_rule: TieRule) -> bool {
    params.beta.is_frozen() && tie_rule == TieRule::Paper
}

fn stationary(params: &Params, pert: Perturbation, tie_rule: TieRule) -> CliResult<Stationary> {
    if uses_closed_form(params, tie_rule) {
        let measure = invariant_measure(params, pert)?;
        let symmetric =
            if pert.is_none() && params.n_sites.is_multiple_of(2) { Some(moments_prop2(&measure)?) } else { None };
        return Ok(Stationary {
            moments: moments_general(&measure),
            log_g: measure.log_g,
            pi: measure.probs,
            symmetric,
            method: "closed-form",
        });
    }
    let chain = build_chain(params, pert, params.beta, tie_rule)?;
    let pi = stationary_solve(&chain)?;
    let (lo, _) = chain.recurrent_class()?;
    let log_g = pi.iter().map(|&p| p.ln() - pi[lo].ln()).collect();
    Ok(Stationary { moments: stationary_moments(&chain, &pi)?, log_g, pi, symmetric: None, method: "chain-oracle" })
}

pub fn render_invariant(cfg: &RunConfig, check: bool) -> CliResult<Rendered> {
    let params = cfg.params()?;
    let pert = cfg.perturbation()?;
    let law = stationary(&params, pert, cfg.tie_rule)?;
    let mut table = Table::new(vec!["ell", "n_plus", "log_g", "pi"]);
    for (ell, (&lg, &p)) in law.log_g.iter().zip(&law.pi).enumerate() {
        table.push(vec![Cell::Int(ell as u64), Cell::Int((pert.k_plus + ell) as u64), Cell::Float(lg), Cell::Float(p)]);
    }
    let mut rendered = Rendered { method: Some(law.method.into()), ..Default::default() };
    table_file(&mut rendered.files, "invariant_distribution", &table, cfg.format);

    if check {
        let chain = build_chain(&params, pert, params.beta, cfg.tie_rule)?;
        let oracle = stationary_solve(&chain)?;
        let diff = max_abs_diff(&law.pi, &oracle)?;
        let balance = detailed_balance_residual(&chain, &law.pi);
        rendered.stdout = format!(
            "verify: max |pi - oracle| = {diff:.3e} (tolerance 1e-10), detailed-balance residual = {balance:.3e}\n"
        );
        if diff > 1e-10 {
            rendered.failure = Some(format!("pi differs from the chain oracle by {diff:.3e} > 1e-10"));
        }
    }
    Ok(rendered)
}

#[derive(Debug, Serialize)]
struct MomentsReport {
    method: String,
    moments: Moments,
    uncertainty_squared: f64,
    mean_n_plus: f64,
    /// The symmetric closed-form moments, when they apply.
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetric_formulas: Option<Moments>,
}

pub fn render_moments(cfg: &RunConfig) -> CliResult<Rendered> {
    let params = cfg.params()?;
    let pert = cfg.perturbation()?;
    let law = stationary(&params, pert, cfg.tie_rule)?;
    let mean_n_plus = law.pi.iter().enumerate().map(|(ell, &p)| (pert.k_plus + ell) as f64 * p).sum();
    let m = law.moments;
    let mut files = OutputSet::default();
    match cfg.format {
        Format::Json => {
            let report = MomentsReport {
                method: law.method.into(),
                moments: m,
                uncertainty_squared: m.uncertainty_squared(),
                mean_n_plus,
                symmetric_formulas: law.symmetric,
            };
            files.add("moments_summary.json", to_json_string(&report));
        }
        Format::Csv => {
            let mut table = Table::new(vec![
                "mean_x_signed",
                "ex2",
                "mean_y",
                "ey2",
                "sigma_x",
                "sigma_y",
                "uncertainty",
                "uncertainty_squared",
                "mean_n_plus",
            ]);
            table.push(
                [m.mean_x_signed, m.ex2, m.mean_y, m.ey2, m.sigma_x, m.sigma_y, m.uncertainty]
                    .into_iter()
                    .chain([m.uncertainty_squared(), mean_n_plus])
                    .map(Cell::Float)
                    .collect(),
            );
            files.add("moments_summary.csv", table.to_csv());
        }
    }
    Ok(Rendered { files, method: Some(law.method.into()), ..Default::default() })
}

#[derive(Debug, Serialize)]
struct CellRef {
    k_plus: usize,
    k_minus: usize,
    uncertainty: f64,
}

#[derive(Debug, Serialize)]
struct MinimaReport {
    mode: SweepMode,
    cells: usize,
    min_value: f64,
    argmin: Vec<CellRef>,
    /// Every minimizer lies strictly inside the swept `k₊` range.
    argmin_interior: bool,
    min_nondegenerate: Option<f64>,
    argmin_nondegenerate: Vec<CellRef>,
    interior_local_minima: Vec<CellRef>,
    /// Cells with fewer than two free sites.
    degenerate_cells: Vec<CellRef>,
}

pub fn sweep_for(cfg: &RunConfig) -> CliResult<Sweep> {
    let params = cfg.params()?;
    if !uses_closed_form(&params, cfg.tie_rule) {
        return Err(CliError::Validation(
            "sweep evaluates the closed-form frozen measure: use --frozen and --tie-rule paper".into(),
        ));
    }
    let result = match cfg.mode {
        SweepMode::KPlus => {
            let last = cfg.n.checked_sub(1 + cfg.k_minus).ok_or_else(|| {
                CliError::Validation(format!("k-minus {} leaves no room for pinned +1 sites", cfg.k_minus))
            })?;
            let range = cfg.from.unwrap_or(0)..=cfg.to.unwrap_or(last);
            cfg.install(|| sweep_k_plus(&params, cfg.k_minus, range))?
        }
        SweepMode::FixedTotal => {
            let total = cfg.total.ok_or_else(|| CliError::Validation("--mode fixed-total needs --total".into()))?;
            let range = cfg.from.unwrap_or(0)..=cfg.to.unwrap_or(total);
            cfg.install(|| sweep_fixed_total(&params, total, range))?
        }
    };
    Ok(result?)
}

pub fn render_sweep(cfg: &RunConfig) -> CliResult<Rendered> {
    let result = sweep_for(cfg)?;
    let mut table = Table::new(vec!["k_plus", "k_minus", "sigma_x", "sigma_y", "uncertainty", "uncertainty_squared"]);
    for r in &result.records {
        table.push(vec![
            Cell::Int(r.k_plus as u64),
            Cell::Int(r.k_minus as u64),
            Cell::Float(r.moments.sigma_x),
            Cell::Float(r.moments.sigma_y),
            Cell::Float(r.uncertainty),
            Cell::Float(r.moments.uncertainty_squared()),
        ]);
    }
    let cell = |i: usize| {
        let r = &result.records[i];
        CellRef { k_plus: r.k_plus, k_minus: r.k_minus, uncertainty: r.uncertainty }
    };
    let first = result.records.first().map(|r| r.k_plus).unwrap_or(0);
    let last = result.records.last().map(|r| r.k_plus).unwrap_or(0);
    let min_nd = result.min_nondegenerate();
    let report = MinimaReport {
        mode: cfg.mode,
        cells: result.records.len(),
        min_value: result.min_value,
        argmin: result
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| result.argmin.contains(&(r.k_plus, r.k_minus)))
            .map(|(i, _)| cell(i))
            .collect(),
        argmin_interior: result.argmin.iter().all(|&(kp, _)| kp > first && kp < last),
        min_nondegenerate: min_nd,
        argmin_nondegenerate: match min_nd {
            Some(v) => (0..result.records.len())
                .filter(|&i| !result.records[i].degenerate && result.records[i].uncertainty - v <= 1e-12)
                .map(cell)
                .collect(),
            None => Vec::new(),
        },
        interior_local_minima: result.interior_local_minima().into_iter().map(cell).collect(),
        degenerate_cells: (0..result.records.len()).filter(|&i| result.records[i].degenerate).map(cell).collect(),
    };
    let mut files = OutputSet::default();
    table_file(&mut files, "sweep_surface", &table, cfg.format);
    files.add("sweep_minima.json", to_json_string(&report));
    Ok(Rendered { files, method: Some("closed-form".into()), ..Default::default() })
}

pub fn render_verify(cfg: &RunConfig, quick: bool, inject_fault: bool) -> CliResult<Rendered> {
    let report = verify::run_battery(&VerifyOptions { quick, inject_fault, seed: cfg.seed });
    let mut files = OutputSet::default();
    files.add("verify_report.json", to_json_string(&report));
    let failed = report.failed_names();
    Ok(Rendered {
        files,
        method: None,
        stdout: report.table(),
        failure: (!failed.is_empty()).then(|| format!("failing checks: {}", failed.join(", "))),
        keep_on_failure: true,
    })
}

/// Manifest params for commands that do not build a model from the config.
fn manifest_params(cfg: &RunConfig) -> Params {
    cfg.params().unwrap_or(Params {
        n_sites: cfg.n,
        dim: cfg.dim,
        alpha: cfg.alpha,
        beta: cfg.beta.map_or(Beta::Frozen, Beta::Finite),
        lambda: cfg.lambda,
        p_star: cfg.p_star,
    })
}

/// Renders, attaches the manifest, writes. Returns the paths and any stdout text.
pub fn execute(
    command: &str,
    cfg: &RunConfig,
    render: impl FnOnce(&RunConfig) -> CliResult<Rendered>,
) -> CliResult<(Vec<std::path::PathBuf>, Rendered)> {
    let started_at = Utc::now();
    let mut rendered = render(cfg)?;
    if let (Some(msg), false) = (&rendered.failure, rendered.keep_on_failure) {
        return Err(CliError::Verification(msg.clone()));
    }
    let mut manifest = RunManifest::new(command, cfg, manifest_params(cfg), started_at);
    manifest.method = rendered.method.clone();
    let mut names = rendered.files.names();
    names.push(RunManifest::file_name(command));
    manifest.outputs = names.iter().map(|n| cfg.out.join(n).display().to_string()).collect();
    manifest.finished_at = Utc::now();
    rendered.files.add(RunManifest::file_name(command), to_json_string(&manifest));
    let paths = rendered.files.commit(&cfg.out)?;
    Ok((paths, rendered))
}
