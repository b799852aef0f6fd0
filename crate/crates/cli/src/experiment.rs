//! Benchmark orchestration for the step-signal denoising problem.
//!
//! A cell is one (algorithm, seed) pair run under a shared config. Each cell
//! regenerates its signal, re-derives the certified threshold and stepsizes,
//! checks the weight certificate, and solves to the configured tolerance.
//! Cells are independent and run in parallel; everything inside a cell is
//! sequential and deterministic, so per-iteration logs are reproducible
//! column-for-column except for wall-clock timings.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use opsplit::admm::{
    admm_general_run, admm_special_run, gs_admm_run, stopping_residual, AdmmRun, RunOptions,
};
use opsplit::splitting::{certify_multi, AdrParams, RegimeCertificate};
use opsplit::Vector;
use rayon::prelude::*;

use crate::config::{Algorithm, ExperimentConfig};
use crate::problem::build_denoise_setup;
use crate::signal::{gen_signal, NOISE_SAMPLER};
use crate::stepsize::certified_stepsizes;
use crate::{CliError, CliResult};

/// Mean absolute error between a recovered signal and a reference.
pub fn mae(x: &Vector, reference: &Vector) -> CliResult<f64> {
    if x.len() != reference.len() || x.is_empty() {
        return Err(CliError::Config(format!(
            "mae needs equal nonzero lengths, got {} and {}",
            x.len(),
            reference.len()
        )));
    }
    Ok((x - reference).abs().sum() / x.len() as f64)
}

/// Everything a finished cell reports.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub final_mae: Option<f64>,
    pub stepsizes: (f64, f64),
    pub certificate: RegimeCertificate,
    pub run: AdmmRun,
}

/// A cell slot: the job identity plus its result or error.
#[derive(Debug)]
pub struct CellResult {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub outcome: CliResult<CellOutcome>,
}

/// All cells of one experiment, in (algorithm, seed) job order.
#[derive(Debug)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
}

/// Runs a single (algorithm, seed) cell of the denoising benchmark.
///
/// The splitting methods only run when the uniform-weight certificate
/// accepts the derived stepsizes; the sequential baseline ignores the
/// certificate because its stepsize has no regime to certify.
pub fn run_denoise_cell(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    seed: u64,
) -> CliResult<CellOutcome> {
    let (clean, noisy) = gen_signal(cfg.n, seed, cfg.noise_sigma)?;
    let setup = build_denoise_setup(&noisy, cfg.data_blocks, cfg.omega)?;
    let (gamma, delta) =
        certified_stepsizes(setup.alpha, setup.beta, cfg.stepsize_mode, cfg.eta)?;
    let params = AdrParams::with_special_kappa(gamma, delta)?;

    let blocks = cfg.data_blocks as f64;
    let theta = vec![blocks; cfg.data_blocks];
    let certificate = certify_multi(&setup.sigmas, &params, Some(&theta))?;
    if !certificate.is_certified() && algorithm != Algorithm::GaussSeidel {
        return Err(opsplit::Error::NotCertified(format!(
            "stepsizes gamma = {gamma}, delta = {delta} fall outside the certified regime: {}",
            certificate.diagnostics.join("; ")
        ))
        .into());
    }

    let opts = RunOptions {
        max_iter: cfg.max_iter,
        eps: cfg.eps,
        mae_ref: Some(clean),
        record_iterates: false,
    };
    let run = match algorithm {
        Algorithm::General => admm_general_run(&setup.problem, &params, None, &opts)?,
        Algorithm::Special => admm_special_run(&setup.problem, gamma, delta, None, &opts)?,
        Algorithm::GaussSeidel => gs_admm_run(&setup.problem, gamma / blocks, None, &opts)?,
    };
    let final_residual = stopping_residual(&setup.problem, &run)?;
    let final_mae = run.history.last().and_then(|row| row.mae);

    Ok(CellOutcome {
        algorithm,
        seed,
        iterations: run.iterations,
        converged: run.converged,
        final_residual,
        final_mae,
        stepsizes: (gamma, delta),
        certificate,
        run,
    })
}

/// Runs every (algorithm, seed) cell of the config, in parallel.
pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<ExperimentReport> {
    cfg.validate()?;
    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(algorithm, seed)| CellResult {
            algorithm,
            seed,
            outcome: run_denoise_cell(cfg, algorithm, seed),
        })
        .collect();
    Ok(ExperimentReport { cells })
}

/// One seed of the fixed-horizon comparison: both methods run the same
/// number of iterations and report the residual they reach.
#[derive(Debug, Clone, Copy)]
pub struct CompareRow {
    pub seed: u64,
    pub special: f64,
    pub baseline: f64,
}

/// Runs the specialized method and the sequential baseline for exactly
/// `horizon` iterations per seed and reports both final residuals.
pub fn run_compare(cfg: &ExperimentConfig, horizon: usize) -> CliResult<Vec<CompareRow>> {
    cfg.validate()?;
    if horizon == 0 {
        return Err(CliError::Config("horizon must be at least 1".into()));
    }
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let (_, noisy) = gen_signal(cfg.n, seed, cfg.noise_sigma)?;
            let setup = build_denoise_setup(&noisy, cfg.data_blocks, cfg.omega)?;
            let (gamma, delta) =
                certified_stepsizes(setup.alpha, setup.beta, cfg.stepsize_mode, cfg.eta)?;
            // eps = 0 disables early stopping so both methods use the full horizon.
            let opts = RunOptions {
                max_iter: horizon,
                eps: 0.0,
                mae_ref: None,
                record_iterates: false,
            };
            let special = admm_special_run(&setup.problem, gamma, delta, None, &opts)?;
            let blocks = cfg.data_blocks as f64;
            let baseline = gs_admm_run(&setup.problem, gamma / blocks, None, &opts)?;
            Ok(CompareRow {
                seed,
                special: stopping_residual(&setup.problem, &special)?,
                baseline: stopping_residual(&setup.problem, &baseline)?,
            })
        })
        .collect()
}

/// Writes one cell's per-iteration log and returns the file path.
///
/// The header comments pin down the run's provenance; the rows are
/// deterministic for a fixed config and seed, timings excepted.
pub fn write_cell_csv(
    dir: &Path,
    cfg: &ExperimentConfig,
    cell: &CellOutcome,
) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}_seed{}.csv", cell.algorithm.name(), cell.seed));
    let mut out = Vec::new();
    writeln!(out, "# algorithm = {}", cell.algorithm.name())?;
    writeln!(out, "# seed = {}", cell.seed)?;
    writeln!(out, "# sampler = {NOISE_SAMPLER}")?;
    writeln!(out, "# n = {}", cfg.n)?;
    writeln!(out, "# stepsize_mode = {}", cfg.stepsize_mode.name())?;
    writeln!(out, "# gamma = {}", cell.stepsizes.0)?;
    writeln!(out, "# delta = {}", cell.stepsizes.1)?;
    writeln!(out, "iter,primal_residual,dual_residual,mae,elapsed_ms")?;
    for row in &cell.run.history {
        let mae = row.mae.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            row.iter, row.primal_residual, row.dual_residual, mae, row.elapsed_ms
        )?;
    }
    fs::write(&path, out)?;
    Ok(path)
}

/// Per-algorithm aggregates over the successful cells of a report.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub cells: usize,
    pub converged: usize,
    pub mean_iterations: f64,
    pub std_iterations: f64,
    pub mean_residual: f64,
    pub mean_mae: f64,
    pub std_mae: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregates a report into one row per algorithm, in config order.
pub fn summarize(cfg: &ExperimentConfig, report: &ExperimentReport) -> Vec<SummaryRow> {
    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let done: Vec<&CellOutcome> = report
                .cells
                .iter()
                .filter(|c| c.algorithm == algorithm)
                .filter_map(|c| c.outcome.as_ref().ok())
                .collect();
            let iters: Vec<f64> = done.iter().map(|c| c.iterations as f64).collect();
            let residuals: Vec<f64> = done.iter().map(|c| c.final_residual).collect();
            let maes: Vec<f64> = done.iter().filter_map(|c| c.final_mae).collect();
            let (mean_iterations, std_iterations) = mean_std(&iters);
            let (mean_residual, _) = mean_std(&residuals);
            let (mean_mae, std_mae) = mean_std(&maes);
            SummaryRow {
                algorithm,
                cells: done.len(),
                converged: done.iter().filter(|c| c.converged).count(),
                mean_iterations,
                std_iterations,
                mean_residual,
                mean_mae,
                std_mae,
            }
        })
        .collect()
}

/// Writes the per-algorithm summary table and returns the file path.
pub fn write_summary_csv(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &ExperimentReport,
) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("summary.csv");
    let mut out = Vec::new();
    writeln!(out, "# stepsize_mode = {}", cfg.stepsize_mode.name())?;
    writeln!(
        out,
        "algorithm,cells,converged,mean_iterations,std_iterations,mean_residual,mean_mae,std_mae"
    )?;
    for row in summarize(cfg, report) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.algorithm.name(),
            row.cells,
            row.converged,
            row.mean_iterations,
            row.std_iterations,
            row.mean_residual,
            row.mean_mae,
            row.std_mae
        )?;
    }
    fs::write(&path, out)?;
    Ok(path)
}
